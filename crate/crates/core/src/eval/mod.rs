//! Classification metrics, threshold selection, the nearest-neighbor label
//! study and 2-D projection of representations.

mod metrics;
mod neighbors;
mod projection;
mod stats;

pub use metrics::{
    auc, confusion_metrics, gmean_threshold, Confusion, MetricsReport, RunEcho, ThresholdChoice, REPORT_SCHEMA_VERSION,
};
pub use neighbors::{knn_label_means, neighbor_study, NeighborReport};
pub use projection::{project_2d, write_points_csv};
pub use stats::{student_t_sf, welch_t_test, Alternative, WelchResult};
