use std::fmt;

use fcp_core::Error;

pub const OK: i32 = 0;
pub const IO: i32 = 1;
pub const USAGE: i32 = 2;
pub const DOMAIN: i32 = 3;
pub const ENGINE: i32 = 4;
pub const BUDGET: i32 = 5;
pub const PRECONDITION: i32 = 6;
pub const CLAIM: i32 = 7;
pub const VERIFY: i32 = 8;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(IO, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidSpec(_) | Error::Config(_) | Error::Parse(_) | Error::Disjointness(_) => USAGE,
            Error::InvalidWindow(..) | Error::Domain(_) | Error::UnreachableQuantile { .. } => DOMAIN,
            Error::Budget { .. } => BUDGET,
            Error::Stationarity { .. } | Error::Precondition { .. } => PRECONDITION,
            Error::Claim2Violation { .. } => CLAIM,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::io(e.to_string())
    }
}
