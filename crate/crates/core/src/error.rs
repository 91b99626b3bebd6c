use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is outside its admissible range.
    InvalidParameter(&'static str),
    /// A likelihood or prior was requested without any observed location.
    EmptyHistory,
    /// The expert prior needs `needed` recent sightings.
    InsufficientHistory { needed: usize, got: usize },
    /// A location falls outside the analysis grid.
    OutOfRegion { lon: f64, lat: f64 },
    /// All posterior mass sits on the expert marker, or every likelihood
    /// underflowed.
    DegeneratePosterior,
    /// Tuple enumeration is exponential in the number of missing days.
    TooManyMissing { missing: usize, limit: usize },
    /// Two assessment series do not cover the same instances.
    Misaligned,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::EmptyHistory => f.write_str("no observed locations in history"),
            Error::InsufficientHistory { needed, got } => {
                write!(f, "need {needed} recent locations, got {got}")
            }
            Error::OutOfRegion { lon, lat } => {
                write!(f, "location ({lon}, {lat}) is outside the analysis grid")
            }
            Error::DegeneratePosterior => f.write_str("posterior has no mass on model parameters"),
            Error::TooManyMissing { missing, limit } => {
                write!(f, "{missing} missing days exceeds the enumeration limit of {limit}")
            }
            Error::Misaligned => f.write_str("assessment series cover different instances"),
        }
    }
}

impl core::error::Error for Error {}
