//! Analytics for end-of-call quality surveys: a star rating plus a checklist
//! of binary problem tokens.
//!
//! Two complementary estimates of how much each impairment costs:
//!
//! * [`timu`]: univariate counterfactual impact of a token on a metric
//!   (poor call rate or call duration), used for ranking.
//! * [`factor`] + [`glm`]: tokens are grouped into latent problem groups via
//!   tetrachoric correlation ([`polychoric`]), parallel analysis and a
//!   varimax-rotated factor model; a logistic model on group indicators then
//!   predicts the relative drop in poor call rate when a group is fixed.
//!
//! [`synthetic`] generates surveys from a planted latent-trait world so every
//! estimator can be checked against ground truth.

pub mod bits;
pub mod descriptives;
pub mod error;
pub mod factor;
pub mod glm;
pub mod normal;
pub mod optim;
pub mod pipeline;
pub mod polychoric;
pub mod rng;
pub mod survey;
pub mod synthetic;
pub mod timu;

pub use error::{Error, Result};
