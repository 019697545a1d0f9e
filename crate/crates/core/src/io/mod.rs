//! Dataset ingestion, artifact files, run configuration and result tables.

pub mod config;
pub mod idx;
pub mod netfile;
pub mod report;

pub use config::RunConfig;
pub use idx::{data_dir, parse_idx_images, parse_idx_labels, IdxDataset, IdxImages, Split, DATA_DIR_ENV};
pub use netfile::{
    load_network, load_ref_network, read_network, read_ref_network, save_network, save_ref_network,
    write_network, write_ref_network, NetworkFile, RefNetworkFile,
};
pub use report::{fmt_sig6, Cell, Table};
