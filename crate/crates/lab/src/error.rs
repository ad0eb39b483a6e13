use relvac_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invariant failure: {}", .0.join(", "))]
    Invariant(Vec<String>),
}

impl LabError {
    /// 0 ok, 2 invariant failure, 3 inadmissible state, 4 config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 4,
            LabError::Invariant(_) => 2,
            LabError::Core(e) => core_exit_code(e),
            LabError::Io(_) | LabError::Csv(_) | LabError::Json(_) => 1,
        }
    }
}

pub fn core_exit_code(e: &CoreError) -> i32 {
    use CoreError::*;
    match e {
        InvalidParams(_) | Unsupported(_) | Mismatch | InadmissibleExponents(_) => 4,
        StepRejected(_) => 2,
        _ => 3,
    }
}

pub type LabResult<T> = Result<T, LabError>;
