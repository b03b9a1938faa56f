pub mod cells;
pub mod gli;
pub mod loss;
pub mod metrics;
pub mod pli;
pub mod register;
pub mod sweep;
