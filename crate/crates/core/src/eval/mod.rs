//! Dataset splitting and ROC/AUC evaluation.

mod roc;
mod scores;
mod split;

pub use roc::{roc_auc, RocResult};
pub use scores::{ScoreRow, ScoreTable};
pub use split::{
    split, MachineType, Manifest, ManifestRecord, Partition, Split, SplitConfig, SplitMode,
    TEST_FRACTION, VALIDATION_FRACTION,
};
