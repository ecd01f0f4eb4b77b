use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("{}: malformed FMAP: {reason}", path.display())]
    Fmap { path: PathBuf, reason: String },
    #[error("{}: unsupported label image: {reason}", path.display())]
    LabelFormat { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Core {
        path: PathBuf,
        source: cellfield_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error(
        "file names differ between {} and {}; only in the first: [{}]; only in the second: [{}]",
        left.display(),
        right.display(),
        only_left.join(", "),
        only_right.join(", ")
    )]
    Orphans {
        left: PathBuf,
        right: PathBuf,
        only_left: Vec<String>,
        only_right: Vec<String>,
    },
}

/// Attaches a file path to lower-level errors.
pub(crate) trait AtPath<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> AtPath<T> for std::result::Result<T, std::io::Error> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }
}

impl<T> AtPath<T> for std::result::Result<T, image::ImageError> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Image {
            path: path.to_owned(),
            source,
        })
    }
}

impl<T> AtPath<T> for cellfield_core::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Core {
            path: path.to_owned(),
            source,
        })
    }
}

impl<T> AtPath<T> for std::result::Result<T, csv::Error> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })
    }
}
