//! Clustering of phylogenetic presence/absence profiles into evolutionarily
//! conserved modules, and expansion of those modules with new genes.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases at the crate root fix the scalar to `f64`.

pub mod dpm;
pub mod expansion;
pub mod preprocess;
pub mod profiles;
pub mod rng;
pub mod scalar;
pub mod simbench;
pub mod tree;
pub mod treehmm;
pub mod treeuncertainty;

pub use profiles::{load_profiles, ProfileError, ProfileMatrix};
pub use scalar::Real;
pub use tree::{parse_newick, parse_tree_set, NodeId, PhyloTree, TreeError, TreeSet};
pub use treehmm::{BackwardTable, BetaCounts, BetaPrior, ErrorRate, HiddenHistory, HmmError, LossParams};

pub type ErrorRate64 = ErrorRate<f64>;
pub type LossParams64 = LossParams<f64>;
pub type BetaPrior64 = BetaPrior<f64>;
pub type BetaCounts64 = BetaCounts<f64>;
