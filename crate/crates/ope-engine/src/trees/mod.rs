//! Weighted trees: weight factors, dimension, reductions, fusions and
//! randomised checks of the weight inequalities.

pub mod gs;
pub mod integration;
pub mod kinematics;
pub mod lemmas;
pub mod ops;
pub mod random;
pub mod tree;
pub mod xi;

pub use gs::{gs, GsReport, GsScan};
pub use kinematics::{eta, eta_bar, eta_bar_i, eta_i, subset_sup, Momentum};
pub use lemmas::LemmaReport;
pub use ops::{amputate, fuse_line, fuse_special, is_fully_reduced, reduce};
pub use tree::{tree_dimension, weight_factor, Relevance, Vertex, WeightedTree};
pub use xi::{XiParams, XiVariant};
