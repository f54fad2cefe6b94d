//! Engine settings shared by the library and the command line.

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optimizer::DEFAULT_GAMMA;
use crate::query::StarScope;
use crate::stats::{DEFAULT_SAMPLE_SIZE, DEFAULT_SEED};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum TransportKind {
    #[default]
    InProc,
    Socket,
    /// In-process delivery with seeded random delays and interleavings.
    Chaos { seed: u64 },
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inproc" => Ok(TransportKind::InProc),
            "socket" => Ok(TransportKind::Socket),
            _ => match s.strip_prefix("chaos") {
                Some("") => Ok(TransportKind::Chaos { seed: 0 }),
                Some(rest) => rest
                    .strip_prefix(':')
                    .and_then(|x| x.parse().ok())
                    .map(|seed| TransportKind::Chaos { seed })
                    .ok_or_else(|| Error::Config(format!("bad chaos seed in {s:?}"))),
                None => Err(Error::Config(format!("unknown transport {s:?}, expected inproc, socket or chaos[:seed]"))),
            },
        }
    }
}

impl FromStr for StarScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vd" => Ok(StarScope::DataVertices),
            "vp" => Ok(StarScope::PropertyVertices),
            _ => Err(Error::Config(format!("unknown star scope {s:?}, expected vd or vp"))),
        }
    }
}

/// Defaults: one worker, hash partitioning, 10 000 reach samples with seed
/// 42, `*` zero-length matches over all data vertices, γ = 1, in-process
/// transport, strict parsing.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub slaves: usize,
    /// Explicit vertex-to-partition map; hash partitioning when absent.
    pub partition_file: Option<PathBuf>,
    pub sample_size: usize,
    pub seed: u64,
    pub star_scope: StarScope,
    pub gamma: f64,
    pub transport: TransportKind,
    pub strict: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            slaves: 1,
            partition_file: None,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: DEFAULT_SEED,
            star_scope: StarScope::default(),
            gamma: DEFAULT_GAMMA,
            transport: TransportKind::default(),
            strict: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slaves == 0 {
            return Err(Error::Config("--slaves must be at least 1".into()));
        }
        if self.slaves > u16::MAX as usize - 1 {
            return Err(Error::Config(format!("--slaves {} is too large", self.slaves)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!("--gamma must be a non-negative number, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_transport() {
        assert_eq!("socket".parse::<TransportKind>().unwrap(), TransportKind::Socket);
        assert_eq!("chaos:7".parse::<TransportKind>().unwrap(), TransportKind::Chaos { seed: 7 });
        assert!("chaos:x".parse::<TransportKind>().is_err());
        assert!("mpi".parse::<TransportKind>().is_err());
    }

    #[test]
    fn validation() {
        assert!(EngineConfig::default().validate().is_ok());
        assert!(EngineConfig { slaves: 0, ..Default::default() }.validate().is_err());
        assert!(EngineConfig { gamma: f64::NAN, ..Default::default() }.validate().is_err());
    }
}
