//! Small numerical kernels shared by the statistical modules.

pub mod normal;
pub mod optimize;
pub mod quad;
pub mod roots;

pub use normal::{std_normal_cdf, std_normal_quantile};
pub use quad::{integrate, integrate_pieces};
pub use roots::{bisect, brent};
