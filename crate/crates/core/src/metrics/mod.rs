//! AUROC, failure-cause attribution, PCA projection and small summary
//! statistics shared by the reports.

pub mod attribution;
pub mod auroc;
pub mod pca;
pub mod stats;

pub use attribution::{attribute, balance, AttributionReport};
pub use auroc::{auroc, auroc_brute_force};
pub use pca::{pca_project, PcaProjection};
pub use stats::{average_ranks, mean_se, spearman, Histogram, Summary};
