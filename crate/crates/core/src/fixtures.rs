//! Reference models used by tests, the acceptance suite and the shipped
//! fixture files.

use crate::abstraction::{ContinuousAffineSystem, DeltaIssCertificate, InputDomain, Interval};
use crate::gmdp::{FiniteGmdp, GmdpDocument};
use crate::scalar::Scalar;

fn lit<S: Scalar>(s: &str) -> S {
    S::parse_literal(s).expect("fixture literal")
}

/// Five-state single-input model with X₀ = {A, B} and X_S = {A, D}.
pub fn five_state_document<S: Scalar>() -> GmdpDocument<S> {
    GmdpDocument::new(["A", "B", "C", "D", "E"], ["u"])
        .with_initial(["A", "B"])
        .with_secret(["A", "D"])
        .output("A", vec![lit("0.1")])
        .output("B", vec![lit("0.1")])
        .output("C", vec![lit("0.25")])
        .output("D", vec![lit("0.2")])
        .output("E", vec![lit("0.3")])
        .transition("A", "u", "A", lit("0.1"))
        .transition("A", "u", "C", lit("0.9"))
        .transition("B", "u", "C", lit("0.8"))
        .transition("B", "u", "D", lit("0.2"))
        .transition("C", "u", "E", lit("1"))
        .transition("D", "u", "D", lit("0.5"))
        .transition("D", "u", "E", lit("0.5"))
        .transition("E", "u", "E", lit("1"))
}

pub fn five_state<S: Scalar>() -> FiniteGmdp<S> {
    five_state_document().into_model().expect("five_state is valid")
}

/// The five-state model with an empty secret set.
pub fn five_state_no_secret<S: Scalar>() -> FiniteGmdp<S> {
    let mut doc = five_state_document::<S>();
    doc.secret.clear();
    doc.into_model().expect("valid")
}

/// `X = X₀ = X_S = {s}` with a self loop.
pub fn single_secret_state<S: Scalar>() -> FiniteGmdp<S> {
    GmdpDocument::new(["s"], ["u"])
        .with_initial(["s"])
        .with_secret(["s"])
        .output("s", vec![lit("0")])
        .transition("s", "u", "s", lit("1"))
        .into_model()
        .expect("valid")
}

/// Concrete six-state system of the relation example. Transition
/// probabilities are a reconstruction: the successor of `A` stays related
/// to `H` with probability 0.9.
pub fn relation_concrete_document<S: Scalar>() -> GmdpDocument<S> {
    GmdpDocument::new(["A", "B", "C", "D", "E", "F"], ["u"])
        .with_initial(["A", "D"])
        .with_secret(["A"])
        .output("A", vec![lit("1")])
        .output("B", vec![lit("2.05")])
        .output("C", vec![lit("1.95")])
        .output("D", vec![lit("1.15")])
        .output("E", vec![lit("2")])
        .output("F", vec![lit("1.92")])
        .transition("A", "u", "B", lit("0.9"))
        .transition("A", "u", "D", lit("0.1"))
        .transition("B", "u", "C", lit("1"))
        .transition("C", "u", "E", lit("1"))
        .transition("D", "u", "C", lit("0.5"))
        .transition("D", "u", "E", lit("0.5"))
        .transition("E", "u", "F", lit("1"))
        .transition("F", "u", "B", lit("0.95"))
        .transition("F", "u", "E", lit("0.05"))
}

/// Three-state abstraction `{G, H, I}` of [`relation_concrete_document`].
pub fn relation_abstract_document<S: Scalar>() -> GmdpDocument<S> {
    GmdpDocument::new(["G", "H", "I"], ["u"])
        .with_initial(["G", "I"])
        .with_secret(["G"])
        .output("G", vec![lit("1")])
        .output("H", vec![lit("2")])
        .output("I", vec![lit("1.1")])
        .transition("G", "u", "H", lit("1"))
        .transition("H", "u", "H", lit("1"))
        .transition("I", "u", "H", lit("1"))
}

pub fn relation_concrete<S: Scalar>() -> FiniteGmdp<S> {
    relation_concrete_document().into_model().expect("valid")
}

pub fn relation_abstract<S: Scalar>() -> FiniteGmdp<S> {
    relation_abstract_document().into_model().expect("valid")
}

/// `R_x` of the relation example.
pub const RELATION_PAIRS: [(&str, &str); 6] = [
    ("A", "G"),
    ("B", "H"),
    ("C", "H"),
    ("E", "H"),
    ("F", "H"),
    ("D", "I"),
];

/// Two inputs, where the revealing input depends on the branch taken at the
/// first step. The feedback maximum (1) exceeds the open-loop maximum (0.5).
pub fn branching_two_input<S: Scalar>() -> FiniteGmdp<S> {
    GmdpDocument::new(["s", "w", "y", "z", "m", "p", "q", "r"], ["a", "b"])
        .with_initial(["s", "w"])
        .with_secret(["s"])
        .output("s", vec![lit("0")])
        .output("w", vec![lit("0")])
        .output("y", vec![lit("1")])
        .output("z", vec![lit("1")])
        .output("m", vec![lit("1")])
        .output("p", vec![lit("3")])
        .output("q", vec![lit("5")])
        .output("r", vec![lit("4")])
        .transition("s", "a", "y", lit("0.5"))
        .transition("s", "a", "z", lit("0.5"))
        .transition("s", "b", "y", lit("0.5"))
        .transition("s", "b", "z", lit("0.5"))
        .transition("w", "a", "m", lit("1"))
        .transition("w", "b", "m", lit("1"))
        .transition("y", "a", "p", lit("1"))
        .transition("y", "b", "r", lit("1"))
        .transition("z", "a", "r", lit("1"))
        .transition("z", "b", "q", lit("1"))
        .transition("m", "a", "r", lit("1"))
        .transition("m", "b", "r", lit("1"))
        .transition("p", "a", "p", lit("1"))
        .transition("p", "b", "p", lit("1"))
        .transition("q", "a", "q", lit("1"))
        .transition("q", "b", "q", lit("1"))
        .transition("r", "a", "r", lit("1"))
        .transition("r", "b", "r", lit("1"))
        .into_model()
        .expect("valid")
}

/// Cell density model `x' = 0.1 x + 0.5 ν + 0.1 ω` observed through `0.1 x`.
pub fn road_traffic_system() -> ContinuousAffineSystem {
    // a = 1 - τv/l - e with τ = 30 s, v = 60 km/h, l = 1 km, e = 0.4.
    ContinuousAffineSystem {
        a: 0.1,
        b: 0.5,
        c: 0.1,
        d: 0.1,
        state_domain: Interval::new(0.0, 3.0),
        initial_domain: Interval::new(2.0, 3.0),
        secret_domain: vec![Interval::new(0.0, 0.5), Interval::new(2.5, 3.0)],
        input_domain: InputDomain::Finite(vec![0.0, 1.0]),
    }
}

/// δ-ISS certificate of the road traffic model with `V(x, x') = |x - x'|`.
pub fn road_traffic_certificate<S: Scalar>() -> DeltaIssCertificate<S> {
    DeltaIssCertificate {
        alpha_lo: lit("1"),
        alpha_hi: lit("1"),
        kappa: lit("0.9"),
        rho: lit("0.5"),
        gamma: lit("1"),
        ell: lit("0.1"),
    }
}
