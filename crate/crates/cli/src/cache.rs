//! Simulation cache.
//!
//! One entry per hash of everything that determines the simulated paths.
//! An entry is a directory holding four dumps (paths and increments for the
//! training and the held-out sets). Headers are checked on every hit; a
//! mismatch or a truncated file is reported and the entry is rebuilt.

use std::path::PathBuf;

use sha2::{Digest, Sha256};
use sigfbsde::bsde::{Data, Dataset, FBSDEProblem, FeatureSpec};
use sigfbsde::sde::dump::{DumpHeader, DumpKind, DumpReader, DumpWriter};
use sigfbsde::sde::{gen_brownian_range, BrownianBatch, PathGrid};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Bumped whenever the cache layout or the simulation scheme changes.
const CACHE_FORMAT: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stem(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CacheEntry {
    pub dir: PathBuf,
    pub key: String,
    pub problem: String,
    pub seed: u64,
    pub n_steps: usize,
    pub horizon: f64,
    pub state_dim: usize,
    pub noise_dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub antithetic: bool,
}

/// Text hashed into the cache key.
pub fn key_material(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let params = toml::to_string(&cfg.params).map_err(|e| CliError::Other(e.to_string()))?;
    Ok(format!(
        "format={CACHE_FORMAT}\nproblem={}\nseed={}\nn={}\nhorizon={:?}\nn_paths={}\nn_test={}\nantithetic={}\n[params]\n{params}",
        cfg.problem, cfg.seed, cfg.segments.n, cfg.segments.horizon, cfg.train.n_paths, cfg.train.n_test, cfg.train.antithetic
    ))
}

impl CacheEntry {
    pub fn for_config(cfg: &ExperimentConfig, problem: &FBSDEProblem) -> Result<Self, CliError> {
        let key = hex::encode(Sha256::digest(key_material(cfg)?.as_bytes()));
        Ok(CacheEntry {
            dir: cfg.cache_dir.join(&key[..16]),
            key,
            problem: cfg.problem.clone(),
            seed: cfg.seed,
            n_steps: cfg.segments.n,
            horizon: cfg.segments.horizon,
            state_dim: problem.state_dim(),
            noise_dim: problem.noise_dim(),
            n_train: cfg.train.n_paths,
            n_test: cfg.train.n_test,
            antithetic: cfg.train.antithetic,
        })
    }

    pub fn file(&self, split: Split, kind: DumpKind) -> PathBuf {
        let what = match kind {
            DumpKind::Paths => "paths",
            DumpKind::Increments => "increments",
        };
        self.dir.join(format!("{}_{what}.bin", split.stem()))
    }

    fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        }
    }

    fn first(&self, split: Split) -> usize {
        match split {
            Split::Train => 0,
            Split::Test => self.n_train,
        }
    }

    fn splits(&self) -> Vec<Split> {
        if self.n_test > 0 {
            vec![Split::Train, Split::Test]
        } else {
            vec![Split::Train]
        }
    }

    pub fn expected_header(&self, split: Split, kind: DumpKind) -> DumpHeader {
        DumpHeader {
            kind,
            n_paths: self.count(split) as u64,
            n_steps: self.n_steps as u64,
            dim: match kind {
                DumpKind::Paths => self.state_dim,
                DumpKind::Increments => self.noise_dim,
            } as u64,
            horizon: self.horizon,
            seed: self.seed,
        }
    }

    fn files(&self) -> Vec<(Split, DumpKind)> {
        self.splits()
            .into_iter()
            .flat_map(|s| [(s, DumpKind::Paths), (s, DumpKind::Increments)])
            .collect()
    }

    /// `Ok(())` when every dump is present and its header matches; otherwise the reason.
    pub fn check(&self) -> Result<(), String> {
        for (split, kind) in self.files() {
            let path = self.file(split, kind);
            if !path.exists() {
                return Err(format!("{} is missing", path.display()));
            }
            let reader = DumpReader::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let want = self.expected_header(split, kind);
            if *reader.header() != want {
                return Err(format!("{}: header {:?} does not match {:?}", path.display(), reader.header(), want));
            }
        }
        Ok(())
    }

    /// Simulates every split and writes the dumps, replacing any previous entry.
    pub fn build(&self, problem: &FBSDEProblem, chunk: usize) -> Result<(), CliError> {
        if self.dir.exists() {
            std::fs::remove_dir_all(&self.dir)?;
        }
        std::fs::create_dir_all(&self.dir)?;
        for split in self.splits() {
            let mut pw = DumpWriter::create(&self.file(split, DumpKind::Paths), self.expected_header(split, DumpKind::Paths))?;
            let mut iw =
                DumpWriter::create(&self.file(split, DumpKind::Increments), self.expected_header(split, DumpKind::Increments))?;
            let (first, count) = (self.first(split), self.count(split));
            let antithetic = self.antithetic && split == Split::Train;
            let mut done = 0;
            while done < count {
                let c = chunk.max(1).min(count - done);
                let bm = gen_brownian_range(self.seed, first + done, c, self.n_steps, self.noise_dim, self.horizon, antithetic)?;
                let paths = problem.model.simulate(&bm)?;
                pw.write_values(paths.values())?;
                iw.write_values(&bm.increments)?;
                done += c;
            }
            pw.finish()?;
            iw.finish()?;
        }
        std::fs::write(self.dir.join("key.txt"), format!("{}\n", self.key))?;
        Ok(())
    }

    /// Streams one split from disk into a dataset.
    pub fn load(&self, problem: &FBSDEProblem, spec: &FeatureSpec, split: Split, chunk: usize) -> Result<Dataset, CliError> {
        let mut pr = DumpReader::open(&self.file(split, DumpKind::Paths))?;
        let mut ir = DumpReader::open(&self.file(split, DumpKind::Increments))?;
        let times = PathGrid::uniform_times(self.n_steps, self.horizon);
        let count = self.count(split);
        let mut ds: Option<Dataset> = None;
        let mut done = 0;
        while done < count {
            let c = chunk.max(1).min(count - done);
            let paths = PathGrid::new(times.clone(), pr.read_paths(c)?, c, self.state_dim)?;
            let bm = BrownianBatch {
                seed: self.seed,
                first_path: self.first(split) + done,
                n_paths: c,
                n_steps: self.n_steps,
                d: self.noise_dim,
                horizon: self.horizon,
                increments: ir.read_paths(c)?,
            };
            match ds.as_mut() {
                None => ds = Some(Dataset::from_paths(problem, spec, &paths, &bm)?),
                Some(d) => d.extend_from_paths(problem, spec, &paths, &bm)?,
            }
            done += c;
        }
        ds.ok_or_else(|| CliError::Validation("empty split".into()))
    }

    pub fn load_data(&self, problem: &FBSDEProblem, spec: &FeatureSpec, chunk: usize) -> Result<Data, CliError> {
        let train = self.load(problem, spec, Split::Train, chunk)?;
        let test = if self.n_test > 0 { Some(self.load(problem, spec, Split::Test, chunk)?) } else { None };
        Ok(Data { train, test })
    }
}

/// Outcome of [`ensure`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
    Rebuilt,
}

/// Makes sure a valid entry exists, rebuilding a damaged one with a warning.
pub fn ensure(entry: &CacheEntry, problem: &FBSDEProblem, chunk: usize) -> Result<CacheStatus, CliError> {
    if entry.dir.exists() {
        match entry.check() {
            Ok(()) => return Ok(CacheStatus::Hit),
            Err(reason) => {
                log::warn!("cache entry {} is unusable ({reason}); regenerating", entry.dir.display());
                entry.build(problem, chunk)?;
                return Ok(CacheStatus::Rebuilt);
            }
        }
    }
    entry.build(problem, chunk)?;
    Ok(CacheStatus::Built)
}

pub fn exists_and_valid(entry: &CacheEntry) -> bool {
    entry.dir.exists() && entry.check().is_ok()
}

