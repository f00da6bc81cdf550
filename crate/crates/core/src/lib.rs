pub mod api;
pub mod compare;
pub mod explain;
pub mod geometry;
pub mod ingest;
pub mod labels;
pub mod lwc;
pub mod matrix;
pub mod num;
pub mod registry;
pub mod store;
pub mod synth;
pub mod text;
