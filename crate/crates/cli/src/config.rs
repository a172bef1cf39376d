//! Run configuration: a TOML file naming backends, templates, rubric,
//! corpora, and role assignments. Relative paths resolve against the config
//! file's directory; flags override config values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use tutor_align_core::backends::{BackendConfig, CACHE_DIR_ENV};
use tutor_align_core::digest::sha256_hex;
use tutor_align_core::orchestration::RubricSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    run: RunSection,
    templates: TemplatesSection,
    #[serde(default)]
    rubric: Option<RubricSection>,
    #[serde(default)]
    backends: Vec<BackendConfig>,
    #[serde(default)]
    roles: Option<Roles>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_parallelism")]
    parallelism: usize,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default)]
    cache_dir: Option<PathBuf>,
    #[serde(default)]
    corpus_test: Option<PathBuf>,
    #[serde(default)]
    corpus_train: Option<PathBuf>,
}

fn default_parallelism() -> usize {
    4
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplatesSection {
    tutor: PathBuf,
    judge: PathBuf,
    compare: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RubricSection {
    path: PathBuf,
}

/// Backend role assignments for eval and build-prefs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub judge: String,
    pub tutors: Vec<String>,
    pub strong: String,
    pub weak: String,
}

/// Fully resolved run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub corpus_test: Option<PathBuf>,
    pub corpus_train: Option<PathBuf>,
    pub tutor_template: String,
    pub judge_template: String,
    pub compare_template: String,
    /// sha256 of each template file, keyed "tutor"/"judge"/"compare".
    pub template_hashes: BTreeMap<String, String>,
    pub rubric: RubricSpec,
    backends: BTreeMap<String, BackendConfig>,
    pub roles: Option<Roles>,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn read_existing(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("{what} file {} does not exist or is unreadable", path.display()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_existing(path, "config")?;
        let file: ConfigFile = toml::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();

        let load_template = |rel: &Path, name: &str| -> Result<(String, String)> {
            let full = resolve(&base, rel);
            let body = read_existing(&full, &format!("{name} template"))?;
            let hash = sha256_hex(body.as_bytes());
            Ok((body, hash))
        };
        let (tutor_template, tutor_hash) = load_template(&file.templates.tutor, "tutor")?;
        let (judge_template, judge_hash) = load_template(&file.templates.judge, "judge")?;
        let (compare_template, compare_hash) = load_template(&file.templates.compare, "compare")?;
        let template_hashes = BTreeMap::from([
            ("tutor".to_string(), tutor_hash),
            ("judge".to_string(), judge_hash),
            ("compare".to_string(), compare_hash),
        ]);

        let rubric = match &file.rubric {
            Some(section) => {
                let full = resolve(&base, &section.path);
                let body = read_existing(&full, "rubric")?;
                let rubric: RubricSpec = serde_json::from_str(&body)
                    .with_context(|| format!("parsing rubric {}", full.display()))?;
                rubric
                    .validate()
                    .with_context(|| format!("rubric {}", full.display()))?;
                rubric
            }
            None => RubricSpec::default(),
        };

        let mut backends = BTreeMap::new();
        for mut backend in file.backends {
            if let Some(script) = backend.mock_script.take() {
                let full = resolve(&base, &script);
                if !full.exists() {
                    bail!(
                        "backend {}: mock script {} does not exist",
                        backend.backend_id,
                        full.display()
                    );
                }
                backend.mock_script = Some(full);
            }
            backend
                .validate()
                .with_context(|| format!("backend {}", backend.backend_id))?;
            if backends
                .insert(backend.backend_id.clone(), backend)
                .is_some()
            {
                bail!("duplicate backend id in config");
            }
        }

        let check_corpus = |rel: &Option<PathBuf>, what: &str| -> Result<Option<PathBuf>> {
            match rel {
                Some(rel) => {
                    let full = resolve(&base, rel);
                    if !full.exists() {
                        bail!("{what} corpus {} does not exist", full.display());
                    }
                    Ok(Some(full))
                }
                None => Ok(None),
            }
        };
        let corpus_test = check_corpus(&file.run.corpus_test, "test")?;
        let corpus_train = check_corpus(&file.run.corpus_train, "train")?;

        if let Some(roles) = &file.roles {
            let mut referenced: Vec<&String> = vec![&roles.judge, &roles.strong, &roles.weak];
            referenced.extend(roles.tutors.iter());
            for id in referenced {
                if !backends.contains_key(id) {
                    bail!("roles reference unknown backend id {id:?}");
                }
            }
        }

        Ok(Self {
            seed: file.run.seed,
            parallelism: file.run.parallelism,
            output_dir: resolve(&base, &file.run.output_dir),
            cache_dir: file.run.cache_dir.as_deref().map(|p| resolve(&base, p)),
            corpus_test,
            corpus_train,
            tutor_template,
            judge_template,
            compare_template,
            template_hashes,
            rubric,
            backends,
            roles: file.roles,
        })
    }

    pub fn backend(&self, id: &str) -> Result<&BackendConfig> {
        match self.backends.get(id) {
            Some(cfg) => Ok(cfg),
            None => {
                let known: Vec<&str> = self.backends.keys().map(String::as_str).collect();
                bail!("unknown backend id {id:?}; configured: {}", known.join(", "))
            }
        }
    }

    pub fn roles(&self) -> Result<&Roles> {
        self.roles
            .as_ref()
            .context("config has no [roles] section (judge/tutors/strong/weak)")
    }
}

/// Cache directory precedence: flag, then `TUTOR_ALIGN_CACHE_DIR`, then the
/// configured directory, then the library default.
pub fn effective_cache_dir(flag: &Option<PathBuf>, config: Option<&RunConfig>) -> Option<PathBuf> {
    if let Some(dir) = flag {
        return Some(dir.clone());
    }
    if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
        if !dir.is_empty() {
            return Some(PathBuf::from(dir));
        }
    }
    config.and_then(|c| c.cache_dir.clone())
}
