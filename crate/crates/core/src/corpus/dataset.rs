//! The three benchmark corpora and where their files live on disk.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::example::Example;
use crate::corpus::semeval::parse_semeval_xml;
use crate::corpus::twitter::parse_twitter;
use crate::error::{Error, Result};

/// Environment variable consulted for the data directory when none is given.
pub const DATA_DIR_ENV: &str = "LCANET_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Laptop,
    Restaurant,
    Twitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::Laptop, Dataset::Restaurant, Dataset::Twitter];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Laptop => "laptop",
            Dataset::Restaurant => "restaurant",
            Dataset::Twitter => "twitter",
        }
    }

    /// SRD threshold used for this corpus unless overridden.
    pub fn default_alpha(self) -> usize {
        match self {
            Dataset::Laptop => 5,
            Dataset::Restaurant => 3,
            Dataset::Twitter => 5,
        }
    }

    /// File names tried in order, relative to the data directory.
    fn candidates(self, split: Split) -> &'static [&'static str] {
        use Dataset::*;
        use Split::*;
        match (self, split) {
            (Laptop, Train) => &["laptop/train.xml", "Laptop_Train_v2.xml", "Laptops_Train.xml"],
            (Laptop, Test) => &["laptop/test.xml", "Laptops_Test_Gold.xml"],
            (Restaurant, Train) => &[
                "restaurant/train.xml",
                "Restaurants_Train_v2.xml",
                "Restaurants_Train.xml",
            ],
            (Restaurant, Test) => &["restaurant/test.xml", "Restaurants_Test_Gold.xml"],
            (Twitter, Train) => &["twitter/train.raw", "acl-14-short-data/train.raw"],
            (Twitter, Test) => &["twitter/test.raw", "acl-14-short-data/test.raw"],
        }
    }

    pub fn locate(self, data_dir: &Path, split: Split) -> Result<PathBuf> {
        let names = self.candidates(split);
        names
            .iter()
            .map(|n| data_dir.join(n))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                Error::Lookup(format!(
                    "no {} {split:?} file under {} (looked for {})",
                    self.name(),
                    data_dir.display(),
                    names.join(", ")
                ))
            })
    }

    pub fn parse(self, bytes: &[u8]) -> Result<Vec<Example>> {
        match self {
            Dataset::Twitter => parse_twitter(bytes),
            _ => parse_semeval_xml(bytes),
        }
    }

    pub fn load_split(self, data_dir: &Path, split: Split) -> Result<Vec<Example>> {
        let path = self.locate(data_dir, split)?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.parse(&bytes).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laptop" | "laptops" => Ok(Dataset::Laptop),
            "restaurant" | "restaurants" => Ok(Dataset::Restaurant),
            "twitter" => Ok(Dataset::Twitter),
            other => Err(Error::Config(format!("unknown dataset {other:?}"))),
        }
    }
}

/// Directory from the environment, if set.
pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}
