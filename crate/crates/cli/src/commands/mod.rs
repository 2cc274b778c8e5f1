pub mod conservation;
pub mod lemma1;
pub mod residual;
pub mod scan;
pub mod theorem2;

use crate::scenario::ConfigError;
use std::io;

/// Renders a CSV writer's output into bytes.
pub(crate) fn csv(f: impl FnOnce(Vec<u8>) -> io::Result<Vec<u8>>) -> Vec<u8> {
    f(Vec::new()).expect("writing to memory cannot fail")
}

pub(crate) fn invalid(path: &str, e: impl ToString) -> ConfigError {
    ConfigError::Value {
        path: path.to_string(),
        message: e.to_string(),
    }
}
