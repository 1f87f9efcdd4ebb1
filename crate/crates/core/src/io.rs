//! File helpers that attach the offending path to errors.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })
}
