//! Deep kernel clustering: a neural embedding and a spectral embedding learned
//! jointly by maximizing the Hilbert–Schmidt independence criterion, followed by
//! k-means on the learned embedding.
//!
//! The building blocks are usable on their own:
//!
//! * [`kernel`]: Gaussian kernels, degree normalization, median bandwidth.
//! * [`hsic`]: the HSIC objective and its pairwise "clumping" form.
//! * [`spectral`]: centered normalized Laplacian and its top eigenvectors.
//! * [`stiefel`]: Cayley-transform ascent on the Stiefel manifold.
//! * [`network`]: the embedding MLP, identity pretraining and analytic gradients.
//! * [`trainer`]: the alternating optimization ([`fit`]).
//! * [`cluster`]: k-means and normalized mutual information.
//! * [`data`]: synthetic datasets, CSV I/O, standardization and PCA.

pub mod cluster;
pub mod data;
pub mod error;
pub mod hsic;
pub mod kernel;
pub mod linalg;
pub mod network;
pub mod spectral;
pub mod stiefel;
pub mod trainer;

pub use cluster::{assign_nearest, kmeans, nmi, KMeansResult};
pub use data::{gen_moons, gen_spirals, load_csv, standardize, LabeledDataset};
pub use error::{KnetError, Result};
pub use kernel::Bandwidth;
pub use network::Mlp;
pub use trainer::{fit, KNetConfig, KNetModel, PredictMode, SigmaMode, UUpdate};
