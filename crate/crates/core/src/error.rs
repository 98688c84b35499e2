use thiserror::Error;

use crate::geometry::GeomError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("gradient mesh {mesh} is folded: {detail}")]
    FoldedMesh { mesh: usize, detail: String },
    #[error("geometry: {0}")]
    Geom(#[from] GeomError),
    #[error("edge traversal stuck at vertex {vertex}: {detail}")]
    TraversalStuck { vertex: usize, detail: String },
    #[error("loop containment is ambiguous: {0}")]
    ContainmentAmbiguity(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("image encoding: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;
