pub mod negatives;
pub mod qa_driver;
