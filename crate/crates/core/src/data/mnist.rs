//! MNIST from the four IDX files, train and test parts pooled.

use std::path::{Path, PathBuf};

use crate::data::idx::{parse_idx, IdxTensor};
use crate::data::task::RawDataset;
use crate::error::{Error, Result};

const PARTS: [(&str, &str); 2] = [
    ("train-images", "train-labels"),
    ("t10k-images", "t10k-labels"),
];

/// Finds `<stem>-idx?-ubyte` or `<stem>.idx?-ubyte` in `dir`.
fn locate(dir: &Path, stem: &str, rank: u8) -> Result<PathBuf> {
    for sep in ['-', '.'] {
        let p = dir.join(format!("{stem}{sep}idx{rank}-ubyte"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Data(format!(
        "{stem} IDX file not found in {}",
        dir.display()
    )))
}

/// The 60000 training then 10000 test digits as one pool of 70000 rows.
pub fn load_mnist(dir: &Path) -> Result<RawDataset> {
    let mut features = Vec::new();
    let mut classes = Vec::new();
    let mut sources = Vec::new();
    let mut dim = 0;
    for (images, labels) in PARTS {
        let ip = locate(dir, images, 3)?;
        let lp = locate(dir, labels, 1)?;
        let IdxTensor::Images {
            n,
            rows,
            cols,
            pixels,
        } = parse_idx(&std::fs::read(&ip)?)?
        else {
            return Err(Error::Format(format!(
                "{} does not hold images",
                ip.display()
            )));
        };
        let IdxTensor::Labels(l) = parse_idx(&std::fs::read(&lp)?)? else {
            return Err(Error::Format(format!(
                "{} does not hold labels",
                lp.display()
            )));
        };
        if l.len() != n {
            return Err(Error::Data(format!("{} images but {} labels", n, l.len())));
        }
        if dim != 0 && dim != rows * cols {
            return Err(Error::Data("image sizes differ between parts".into()));
        }
        dim = rows * cols;
        features.extend(pixels);
        classes.extend(l.iter().map(|d| d.to_string()));
        sources.push(ip.display().to_string());
        sources.push(lp.display().to_string());
    }
    Ok(RawDataset {
        features,
        dim,
        classes,
        sources,
    })
}
