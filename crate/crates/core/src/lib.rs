#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confset;
pub mod distributions;
pub mod divergences;
pub mod error;
pub mod numeric;
pub mod bounds;
pub mod pilot;
pub mod relfit;
pub mod simharness;

pub use confset::{ConfidenceSet, RelativeFit, SplitSample, VarianceSource};
pub use distributions::{
    negbin_from_mean_dispersion, Distribution, Domain, FamilyKind, GridSpec, ParameterSpace, ParametricFamily, Support,
};
pub use bounds::{Decision, RuleKind, ThresholdRule};
pub use divergences::{divergence, DivergenceTag, KernelSpec};
pub use error::{Error, Result};
pub use pilot::{fit_mle, fit_min_distance, PilotFit, PilotSpec};
pub use relfit::{PairStatistic, StatisticSample, StatisticSpec};
