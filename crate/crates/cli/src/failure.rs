use std::fmt;

use nlskdv::Error;

/// Every way a run can end unsuccessfully, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Validation(String),
    Core(Error),
    Io(std::io::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Core(e) => match e {
                Error::InvalidGrid { .. } | Error::InvalidParameter { .. } | Error::SizeMismatch { .. } => 3,
                Error::BlowUp { .. } => 4,
                Error::GramianIllConditioned { .. } => 5,
                Error::PicardNonContraction { .. } => 6,
                Error::LocalControlDivergence { .. } => 7,
                Error::DecayStalled { .. } => 8,
                Error::VerificationFailed { .. } => 9,
                Error::AlreadyAtRest | Error::TrajectoryTooShort { .. } => 10,
                Error::Io(_) | Error::Json(_) => 11,
            },
            Failure::Io(_) => 11,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.code() {
            2 => "parse",
            3 => "validation",
            4 => "blow-up",
            5 => "gramian",
            6 => "picard",
            7 => "local-divergence",
            8 => "decay-stalled",
            9 => "verification",
            10 => "degenerate",
            _ => "io",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Parse(m) | Failure::Validation(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}
