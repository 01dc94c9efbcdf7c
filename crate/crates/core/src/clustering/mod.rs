//! Representative selection: Chamfer distances, diffusion maps, k-means.

mod chamfer;
mod diffusion_map;
mod kdtree;
mod kmeans;

pub use chamfer::{chamfer_distance, pairwise_chamfer, DistanceMatrix, BRUTE_FORCE_LIMIT};
pub use diffusion_map::{diffusion_map, Bandwidth, DiffusionEmbedding};
pub use kdtree::KdTree;
pub use kmeans::{kmeans, select_representatives, KMeans, MAX_ITERATIONS, SHIFT_TOLERANCE};

/// Default number of diffusion eigenpairs.
pub const DEFAULT_EIGENPAIRS: usize = 64;
