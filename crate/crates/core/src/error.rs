// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the interval where the operation is defined.
    #[error("{what} = {value} is outside the valid interval {valid}")]
    Domain {
        what: &'static str,
        value: f64,
        valid: String,
    },

    #[error("non-finite state at propagation step {step}")]
    NumericFailure { step: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("objective returned {value} at point {point:?}")]
    NonFiniteObjective { value: f64, point: Vec<f64> },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(what: &'static str, value: f64, valid: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            valid: valid.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
