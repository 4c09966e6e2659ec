//! Client-side tooling: key files, image I/O, the synthetic corpus, the
//! clear-versus-encrypted benchmark and the reconstruction attack demo.

pub mod attack;
pub mod bench;
pub mod corpus;
pub mod keyfile;

use std::path::Path;

use socbir_core::wavelet::Grid;
use socbir_server::ServerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] socbir_core::Error),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CRYPTO: i32 = 3;
pub const EXIT_PACKAGE: i32 = 4;
pub const EXIT_IO: i32 = 5;

fn core_exit(e: &socbir_core::Error) -> i32 {
    use socbir_core::Error as E;
    match e {
        E::MalformedPackage(_) | E::Format(_) | E::FingerprintMismatch { .. } | E::IncompleteBands(_) => EXIT_PACKAGE,
        E::InvalidParameter(_) | E::Geometry(_) => EXIT_USAGE,
        _ => EXIT_CRYPTO,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => core_exit(e),
            CliError::Server(ServerError::Core(e)) => core_exit(e),
            CliError::Server(ServerError::Io(_)) | CliError::Io(_) | CliError::Image(_) | CliError::Csv(_) => EXIT_IO,
            CliError::Server(ServerError::Remote { kind, .. }) => match kind.as_str() {
                "malformed_package" | "fingerprint_mismatch" | "conflict" | "invalid_id" => EXIT_PACKAGE,
                "random_mismatch" | "crypto" => EXIT_CRYPTO,
                _ => EXIT_IO,
            },
            CliError::Server(_) => EXIT_PACKAGE,
        }
    }
}

/// Loads a greyscale image (PGM, PNG) as 8-bit pixel values.
pub fn read_image(path: &Path) -> Result<Grid<i64>, CliError> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img.pixels().map(|p| p.0[0] as i64).collect();
    Ok(Grid::new(w, h, values)?)
}

/// Writes 8-bit grey levels; the format follows the extension.
pub fn write_gray(path: &Path, width: usize, height: usize, pixels: Vec<u8>) -> Result<(), CliError> {
    let img = image::GrayImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| CliError::Usage("pixel buffer does not match dimensions".into()))?;
    img.save(path)?;
    Ok(())
}

pub fn write_image(path: &Path, grid: &Grid<i64>) -> Result<(), CliError> {
    let pixels = grid.values().iter().map(|&v| v.clamp(0, 255) as u8).collect();
    write_gray(path, grid.width(), grid.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::from_fn(4, 2, |x, y| (x * 40 + y * 10) as i64);
        for name in ["a.pgm", "a.png"] {
            let p = dir.path().join(name);
            write_image(&p, &g).unwrap();
            assert_eq!(read_image(&p).unwrap(), g);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::Core(socbir_core::Error::RandomMismatch).exit_code(), EXIT_CRYPTO);
        assert_eq!(CliError::Core(socbir_core::Error::Format("x".into())).exit_code(), EXIT_PACKAGE);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "x");
        assert_eq!(CliError::Io(io).exit_code(), EXIT_IO);
    }
}
