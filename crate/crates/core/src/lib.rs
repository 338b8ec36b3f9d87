//! Approximate initial-state and current-state opacity of finite general
//! Markov decision processes.
//!
//! The crate builds ε-approximate state estimators, computes bounded-horizon
//! bad-set reachability by value iteration, checks opacity-preserving
//! simulation relations through maximum couplings, abstracts scalar affine
//! Gaussian systems onto grids, and cross-checks results by Monte Carlo.
//!
//! Numeric routines are generic over [`Scalar`]; `f64` is the default and
//! [`BigRational`] gives exact arithmetic.
//!
//! ```
//! use opaquemdp::{fixtures, verify_opacity, EstimatorKind};
//!
//! let model = fixtures::five_state::<f64>();
//! let verdict = verify_opacity(&model, EstimatorKind::Initial, &0.0, &0.9, 3).unwrap();
//! assert!(verdict.opaque);
//! ```

pub mod abstraction;
pub mod coupling;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod format;
pub mod gmdp;
pub mod montecarlo;
pub mod reachability;
pub mod relations;
pub mod scalar;

pub use num_rational::BigRational;

pub use abstraction::{
    build_abstraction, check_cursop_params, check_initsop_params, relation_radius, Abstraction,
    AbstractionParams, ContinuousAffineSystem, DeltaIssCertificate, FeasibilityReport, InputDomain,
    Interval,
};
pub use coupling::{lifting_exists, max_coupling_mass};
pub use error::{Error, Result};
pub use estimator::{
    build_current_estimator, build_initial_estimator, current_state_estimate,
    initial_state_estimate, CurrentEstimator, CurrentEstimatorState, EstimatorGmdp, EstimatorKind,
    InitialEstimator, InitialEstimatorState,
};
pub use gmdp::{FiniteGmdp, GmdpDocument, KernelEntry, ValidationReport, Violation};
pub use montecarlo::{
    estimate_violation, sample_trajectory, Estimate, InputPlan, SimulationConfig,
};
pub use reachability::{
    brute_force_max_violation, classify_states, exact_violation_probability, history_max_violation,
    open_loop_max_violation, value_iteration, verify_opacity, OpacityVerdict, ReachabilityResult,
    StateClass,
};
pub use relations::{
    check_cursop, check_initsop, check_relation, transfer_guarantee, transfer_parameters,
    GuaranteeTransfer, RelationCheckReport, RelationKind, StateRelation,
};
pub use scalar::Scalar;

pub type Gmdp = FiniteGmdp<f64>;
pub type ExactGmdp = FiniteGmdp<BigRational>;
pub type Verdict = OpacityVerdict<f64>;
pub type ExactVerdict = OpacityVerdict<BigRational>;
