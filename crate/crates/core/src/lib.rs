//! Proxy feature removal for fair tabular classification.
//!
//! Sensitive attributes are kept out of the feature matrix, but other
//! features can act as proxies for them. [`pfr::pfr_run`] trains a logistic
//! model to predict a sensitive attribute and greedily deletes its most
//! important feature until the model's AUC falls to a threshold `tau`. The
//! target classifier is then trained on what is left
//! ([`pfr::train_fair_model`]), and [`experiment`] sweeps `tau` to chart the
//! accuracy / disparate-impact tradeoff.
//!
//! ```
//! use pfr::prelude::*;
//! use pfr::synthetic::{planted_proxy, PlantedProxyConfig};
//!
//! let data = planted_proxy(&PlantedProxyConfig::default());
//! let s = SensitiveLabels::binary("s", &data.sensitive);
//! let tau = tau_default(&data.sensitive);
//! let (residual, trace) = pfr_run(&data.matrix, &s, tau, &PfrConfig::default()).unwrap();
//! assert_eq!(trace.steps[0].removed_column.id, "f3");
//! assert!(residual.column_index("f3").is_none());
//! ```

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod pfr;
pub mod synthetic;

pub use error::{PfrError, Result};

pub mod prelude {
    pub use crate::dataset::{
        drop_columns, load_csv, min_max_scale, one_hot_encode, oversample_minority, split,
        ColumnInfo, DatasetConfig, EncodedMatrix, TabularDataset,
    };
    pub use crate::error::{PfrError, Result};
    pub use crate::metrics::{
        accuracy, auc_one_vs_all, auc_roc, disparate_impact_average, disparate_impact_binary,
        tau_default, FairnessReport,
    };
    pub use crate::model::{
        most_important_feature, predict_label, predict_proba, train_logistic, LogisticModel,
        TrainConfig,
    };
    pub use crate::pfr::{
        pfr_multi, pfr_run, recheck, train_fair_model, PfrConfig, RemovalTrace, SensitiveLabels,
    };
}
