use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model input outside the range the closed forms are derived on.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// Telecommunication is only an alternative when it costs more per contact than meeting in person.
    #[error("telecom_not_costlier: telecom cost {telecom} does not exceed face-to-face cost {face_to_face}")]
    TelecomNotCostlier { telecom: f64, face_to_face: f64 },

    #[error("occupation {soc}: missing {item}")]
    Classification { soc: String, item: String },

    #[error("{source_name}{}: {message}", line.map(|l| format!(", line {l}")).unwrap_or_default())]
    Ingestion {
        source_name: String,
        line: Option<u64>,
        message: String,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain<T: crate::Real>(name: &'static str, value: T, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value: crate::scalar::as_f64(value),
            expected,
        }
    }

    pub(crate) fn ingestion(source_name: impl Into<String>, line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
