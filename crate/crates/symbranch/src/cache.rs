//! On-disk cache for return curves.
//!
//! Torus quadrature (3-d in particular) dominates repeated CLI runs, so
//! curves are persisted one file per curve, keyed by a content hash of
//! (kernel spec, rate, grid, tolerance, library version). Each file is
//! self-describing: a `#`-commented JSON header followed by the `t,p` CSV
//! body.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::export::{atomic_write, fmt_float};
use crate::kernels::{CurveProvenance, Kernel, KernelSpec, PowerTail, ReturnCurve};

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "SYMBRANCH_CACHE_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheHeader {
    kernel: KernelSpec,
    rate: f64,
    symmetrization: bool,
    tol: f64,
    version: String,
    provenance: CurveProvenance,
    tail: Option<PowerTail>,
}

#[derive(Debug, Clone)]
pub struct CurveCache {
    dir: PathBuf,
}

impl CurveCache {
    pub fn new(dir: impl Into<PathBuf>) -> CurveCache {
        CurveCache { dir: dir.into() }
    }

    /// Cache at `$SYMBRANCH_CACHE_DIR`, or `fallback` when unset.
    pub fn from_env(fallback: impl Into<PathBuf>) -> CurveCache {
        match std::env::var(CACHE_DIR_ENV) {
            Ok(dir) if !dir.is_empty() => CurveCache::new(dir),
            _ => CurveCache::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(kernel: &Kernel, grid: &[f64], tol: f64) -> String {
        let mut hasher = Sha256::new();
        let spec_json = serde_json::to_string(kernel.spec()).expect("serializable spec");
        hasher.update(spec_json.as_bytes());
        hasher.update(kernel.rate().to_le_bytes());
        hasher.update([kernel.is_symmetrization() as u8]);
        hasher.update(tol.to_le_bytes());
        hasher.update(crate::VERSION.as_bytes());
        for t in grid {
            hasher.update(t.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("curve-{key}.csv"))
    }

    /// Load a cached curve, or compute it and store it.
    pub fn get_or_build(&self, kernel: &Kernel, grid: &[f64], tol: f64) -> Result<ReturnCurve> {
        let key = Self::key(kernel, grid, tol);
        let path = self.path_for(&key);
        if let Some(curve) = self.load(&path) {
            return Ok(curve);
        }
        let curve = kernel.return_curve(grid, tol)?;
        self.store(&path, kernel, &curve, tol)?;
        Ok(curve)
    }

    fn load(&self, path: &Path) -> Option<ReturnCurve> {
        let content = std::fs::read_to_string(path).ok()?;
        let mut header: Option<CacheHeader> = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut seen_header_row = false;
        for line in content.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if rest.starts_with('{') {
                    header = serde_json::from_str(rest).ok();
                }
                continue;
            }
            if !seen_header_row {
                if line.trim() != "t,p" {
                    return None;
                }
                seen_header_row = true;
                continue;
            }
            let mut parts = line.split(',');
            let t: f64 = parts.next()?.parse().ok()?;
            let p: f64 = parts.next()?.parse().ok()?;
            times.push(t);
            values.push(p);
        }
        let header = header?;
        if times.is_empty() || times[0] != 0.0 {
            return None;
        }
        Some(ReturnCurve::new(times, values, header.tail, header.provenance))
    }

    fn store(&self, path: &Path, kernel: &Kernel, curve: &ReturnCurve, tol: f64) -> Result<()> {
        let header = CacheHeader {
            kernel: kernel.spec().clone(),
            rate: kernel.rate(),
            symmetrization: kernel.is_symmetrization(),
            tol,
            version: crate::VERSION.to_string(),
            provenance: curve.provenance(),
            tail: curve.tail(),
        };
        let mut out = String::new();
        out.push_str("# symbranch return curve cache\n");
        out.push_str("# ");
        out.push_str(&serde_json::to_string(&header).expect("serializable header"));
        out.push('\n');
        out.push_str("t,p\n");
        for (t, p) in curve.times().iter().zip(curve.values().iter()) {
            out.push_str(&fmt_float(*t));
            out.push(',');
            out.push_str(&fmt_float(*p));
            out.push('\n');
        }
        atomic_write(path, &out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_cache(tag: &str) -> CurveCache {
        let dir = std::env::temp_dir().join(format!(
            "symbranch-cache-test-{}-{tag}",
            std::process::id()
        ));
        std::fs::remove_dir_all(&dir).ok();
        CurveCache::new(dir)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cache = temp_cache("roundtrip");
        let kernel = Kernel::discrete_laplacian(1);
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
        let built = cache.get_or_build(&kernel, &grid, 1e-9).unwrap();
        let loaded = cache.get_or_build(&kernel, &grid, 1e-9).unwrap();
        for (a, b) in built.values().iter().zip(loaded.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(
            built.tail().map(|t| t.exponent),
            loaded.tail().map(|t| t.exponent)
        );
        std::fs::remove_dir_all(cache.dir()).ok();
    }

    #[test]
    fn key_separates_kernels_and_tolerances() {
        let grid = [0.0, 1.0, 2.0];
        let k1 = Kernel::discrete_laplacian(1);
        let k2 = Kernel::discrete_laplacian(2);
        let a = CurveCache::key(&k1, &grid, 1e-8);
        let b = CurveCache::key(&k2, &grid, 1e-8);
        let c = CurveCache::key(&k1, &grid, 1e-9);
        let d = CurveCache::key(&k1.symmetrize(), &grid, 1e-8);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn corrupt_file_is_rebuilt() {
        let cache = temp_cache("corrupt");
        let kernel = Kernel::discrete_laplacian(1);
        let grid = [0.0, 0.5, 1.0];
        let key = CurveCache::key(&kernel, &grid, 1e-8);
        let path = cache.path_for(&key);
        std::fs::create_dir_all(cache.dir()).unwrap();
        std::fs::write(&path, "garbage").unwrap();
        let curve = cache.get_or_build(&kernel, &grid, 1e-8).unwrap();
        assert_eq!(curve.values()[0], 1.0);
        std::fs::remove_dir_all(cache.dir()).ok();
    }
}
