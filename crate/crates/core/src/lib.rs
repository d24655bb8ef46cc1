//! Exact tree-ensemble attributions (Shapley, Banzhaf, Shapley interaction)
//! for deep trees.
//!
//! Every leaf of a tree is treated as a small cooperative game over the
//! distinct features on its path. Consumers and background rows are reduced
//! to bit patterns over those features, and the attribution vector for a leaf
//! is `M · f`, where `f` is the pattern distribution of the background and `M`
//! is fully determined by one cached diagonal per feature count. The product
//! runs in `O(k 2^k)` through two subset-sum transforms.
//!
//! ```no_run
//! use treeshap_hd::{explain, load_canonical, Dataset, ExplainRequest, Mode, ValueFunctional};
//!
//! let model = load_canonical("model.json")?;
//! let consumers = Dataset::from_csv("rows.csv")?;
//! let background = Dataset::from_csv("background.csv")?;
//! let result = explain(&ExplainRequest {
//!     model: &model,
//!     consumers: &consumers,
//!     background: Some(&background),
//!     mode: Mode::Background,
//!     functional: ValueFunctional::Shapley,
//! })?;
//! println!("{:?}", result.row(0));
//! # Ok::<(), treeshap_hd::Error>(())
//! ```

pub mod alloc;
pub mod bench;
pub mod cache;
pub mod cli;
pub mod cube;
pub mod data;
pub mod engine;
mod error;
pub mod fastmult;
pub mod model;
pub mod oracle;
pub mod patterns;
pub mod synth;
pub mod validate;

pub use cache::{compute_ms, DiagonalCache};
pub use cube::{Cube, Target, ValueFunctional};
pub use data::Dataset;
pub use engine::{
    explain, explain_dense_baseline, explain_with, AttributionResult, ExplainOptions,
    ExplainRequest, Method,
};
pub use error::{Error, Result};
pub use fastmult::{strassen_like_mult, DiagonalVector};
pub use model::{
    load_canonical, load_lightgbm_text, parse_canonical, parse_lightgbm_text, save_canonical,
    Comparison, DecisionTree, EnsembleModel, Node,
};
pub use patterns::{Mode, UfdpGenerator};
