use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures reading or writing data files and configuration.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        DataError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        DataError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }

    pub fn config(path: &Path, msg: impl Into<String>) -> Self {
        DataError::Config {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

/// Opens a CSV reader with headers.
pub fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Opens a buffered CSV writer.
pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, DataError> {
    let file = std::fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Reads every row of a headed CSV file into `T`.
pub fn read_csv_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    let mut rdr = csv_reader(path)?;
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| DataError::csv(path, e))
}

/// Writes rows under the serde-derived header.
pub fn write_csv_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), DataError> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| DataError::csv(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}
