//! The guide's chapters, compiled as doc tests so every snippet stays
//! runnable.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/storage.md")]
pub mod storage {}

#[doc = include_str!("../../../book/src/mapreduce.md")]
pub mod mapreduce {}

#[doc = include_str!("../../../book/src/dataflow.md")]
pub mod dataflow {}

#[doc = include_str!("../../../book/src/tables.md")]
pub mod tables {}

#[doc = include_str!("../../../book/src/column-families.md")]
pub mod column_families {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/ingestion.md")]
pub mod ingestion {}

#[doc = include_str!("../../../book/src/tasks.md")]
pub mod tasks {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}
