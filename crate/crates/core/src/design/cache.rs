use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DesignError, NoiseCell, ParamSet, TaskPoint};
use crate::control::{Metrics, SimOutcome};

/// Bumped whenever the row layout or the meaning of a column changes.
pub const CACHE_SCHEMA_VERSION: u32 = 1;

/// Identifies one Monte Carlo cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub family: String,
    pub params: String,
    pub scenario: String,
    pub curvature: String,
    pub speed: String,
    pub w_scale: String,
    pub v_scale: String,
    pub drop_p: String,
    pub runs: usize,
    pub seed: u64,
    pub settings: String,
}

impl CacheKey {
    pub fn new(p: &ParamSet, task: &TaskPoint, cell: &NoiseCell, runs: usize, seed: u64, settings: &str) -> Self {
        CacheKey {
            family: p.family.name().into(),
            params: p.label.clone(),
            scenario: task.scenario.name().into(),
            curvature: format!("{:?}", task.curvature).to_lowercase(),
            speed: task.speed.to_string(),
            w_scale: cell.w_scale.to_string(),
            v_scale: cell.v_scale.to_string(),
            drop_p: cell.drop_p.to_string(),
            runs,
            seed,
            settings: settings.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    schema: u32,
    family: String,
    params: String,
    scenario: String,
    curvature: String,
    speed: String,
    w_scale: String,
    v_scale: String,
    drop_p: String,
    runs: usize,
    seed: u64,
    settings: String,
    ok_runs: usize,
    failed: usize,
    incomplete: usize,
    mean: String,
    std_err: String,
}

fn encode(m: &Metrics) -> String {
    m.to_array().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn decode(s: &str) -> Option<Metrics> {
    let v: Vec<f64> = s.split(';').map(|x| x.parse().ok()).collect::<Option<_>>()?;
    Some(Metrics::from_array(v.try_into().ok()?))
}

/// Monte Carlo outcomes on disk as CSV, one row per cell. Floats are written
/// in shortest round-trip form, so reloaded outcomes are bit-identical.
#[derive(Debug, Clone)]
pub struct SimCache {
    path: PathBuf,
    entries: BTreeMap<CacheKey, SimOutcome>,
    dirty: bool,
}

impl SimCache {
    /// Opens `path`, or starts empty if it does not exist. Rows of another
    /// schema version are dropped.
    pub fn open(path: &Path) -> Result<Self, DesignError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let mut r = csv::Reader::from_path(path).map_err(|e| DesignError::Cache(e.to_string()))?;
            for row in r.deserialize::<Row>() {
                let row = row.map_err(|e| DesignError::Cache(format!("{}: {e}", path.display())))?;
                if row.schema != CACHE_SCHEMA_VERSION {
                    continue;
                }
                let (Some(mean), Some(std_err)) = (decode(&row.mean), decode(&row.std_err)) else {
                    return Err(DesignError::Cache(format!("{}: malformed metrics", path.display())));
                };
                let key = CacheKey {
                    family: row.family,
                    params: row.params,
                    scenario: row.scenario,
                    curvature: row.curvature,
                    speed: row.speed,
                    w_scale: row.w_scale,
                    v_scale: row.v_scale,
                    drop_p: row.drop_p,
                    runs: row.runs,
                    seed: row.seed,
                    settings: row.settings,
                };
                entries.insert(
                    key,
                    SimOutcome { mean, std_err, runs: row.ok_runs, failed: row.failed, incomplete: row.incomplete },
                );
            }
        }
        Ok(SimCache { path: path.to_path_buf(), entries, dirty: false })
    }

    pub fn get(&self, key: &CacheKey) -> Option<&SimOutcome> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: CacheKey, outcome: SimOutcome) {
        self.entries.insert(key, outcome);
        self.dirty = true;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the whole cache to a sibling file and renames it over the old one.
    pub fn save(&mut self) -> Result<(), DesignError> {
        if let Some(dir) = self.path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let tmp = self.path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut w = csv::Writer::from_path(&tmp).map_err(|e| DesignError::Cache(e.to_string()))?;
            for (key, o) in &self.entries {
                w.serialize(Row {
                    schema: CACHE_SCHEMA_VERSION,
                    family: key.family.clone(),
                    params: key.params.clone(),
                    scenario: key.scenario.clone(),
                    curvature: key.curvature.clone(),
                    speed: key.speed.clone(),
                    w_scale: key.w_scale.clone(),
                    v_scale: key.v_scale.clone(),
                    drop_p: key.drop_p.clone(),
                    runs: key.runs,
                    seed: key.seed,
                    settings: key.settings.clone(),
                    ok_runs: o.runs,
                    failed: o.failed,
                    incomplete: o.incomplete,
                    mean: encode(&o.mean),
                    std_err: encode(&o.std_err),
                })
                .map_err(|e| DesignError::Cache(e.to_string()))?;
            }
            w.flush()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        self.dirty = false;
        Ok(())
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{controller_grid, Family};
    use crate::plant::{CurvatureLevel, PathKind};

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("cache.csv");
        let mut c = SimCache::open(&path).unwrap();
        assert!(c.is_empty());
        let p = &controller_grid(Family::Pid)[3];
        let task = TaskPoint::new(PathKind::NinetyDegreeTurn, CurvatureLevel::Low, 8.0);
        let cell = NoiseCell { w_scale: 4.0, v_scale: 1.0, drop_p: 0.1 };
        let key = CacheKey::new(p, &task, &cell, 10, 3, "abc");
        let m = Metrics { e_p_tot: 1.0 / 3.0, delta_tot: 1e-17, duration: 6.41, ..Default::default() };
        let o = SimOutcome { mean: m, std_err: m, runs: 9, failed: 1, incomplete: 0 };
        c.insert(key.clone(), o.clone());
        assert!(c.is_dirty());
        c.save().unwrap();
        let back = SimCache::open(&path).unwrap();
        assert_eq!(back.get(&key), Some(&o));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("schema,family,params"));
        // stale schema rows are ignored
        std::fs::write(&path, text.replacen("\n1,", "\n0,", 1)).unwrap();
        assert!(SimCache::open(&path).unwrap().is_empty());
    }
}
