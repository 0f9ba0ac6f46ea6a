//! Experiment files.
//!
//! A file is a list of `key = value` lines grouped under `[dataset]`,
//! `[model]`, `[training]`, `[evaluation]` and `[defense]`. Blank lines and
//! lines starting with `#` are ignored. Lists are comma separated. Only
//! `dataset.kind` and `training.variant` are required; every other key falls
//! back to the default shown by [`ExperimentConfig::default`].

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::str::FromStr;

use crate::data::DatasetConfig;
use crate::defense::{AttackConfig, AttackKind, DefenseConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::training::{ArLoss, TrainConfig, Variant};

/// Settings for `defend`: the projection, the attack and the sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DefenseSection {
    pub projection: DefenseConfig,
    pub attack: AttackConfig,
    pub iterations_grid: Vec<usize>,
    pub restarts_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub test_samples: usize,
}

impl Default for DefenseSection {
    fn default() -> Self {
        Self {
            projection: DefenseConfig::default(),
            attack: AttackConfig::default(),
            iterations_grid: vec![10, 50, 100, 200],
            restarts_grid: vec![10],
            seeds: vec![0, 1, 2],
            test_samples: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ExperimentConfig {
    pub training: TrainConfig,
    pub evaluation: EvalConfig,
    pub defense: DefenseSection,
}

const SECTIONS: [&str; 5] = ["dataset", "model", "training", "evaluation", "defense"];

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Entries {
    map: BTreeMap<(String, String), Entry>,
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

impl Entries {
    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.map.get_mut(&(section.to_string(), key.to_string())).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn parse_with<T>(
        &mut self,
        section: &str,
        key: &str,
        f: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, v)) => f(&v)
                .map(Some)
                .map_err(|e| Error::Config {
                    line,
                    message: format!("{section}.{key}: {e}"),
                }),
        }
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, into: &mut T) -> Result<()>
    where
        T::Err: Display,
    {
        if let Some(v) = self.parse_with(section, key, |s| s.parse::<T>().map_err(|e| e.to_string()))? {
            *into = v;
        }
        Ok(())
    }

    fn get_list<T: FromStr>(&mut self, section: &str, key: &str, into: &mut Vec<T>) -> Result<()>
    where
        T::Err: Display,
    {
        let parsed = self.parse_with(section, key, |s| {
            s.split(',')
                .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
                .collect::<std::result::Result<Vec<T>, String>>()
        })?;
        if let Some(v) = parsed {
            *into = v;
        }
        Ok(())
    }

    fn get_bool(&mut self, section: &str, key: &str, into: &mut bool) -> Result<()> {
        if let Some(v) = self.parse_with(section, key, parse_bool)? {
            *into = v;
        }
        Ok(())
    }

    fn require(&mut self, section: &str, key: &str) -> Result<(usize, String)> {
        self.take(section, key)
            .ok_or_else(|| Error::MissingKey(format!("{section}.{key}")))
    }
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got {s:?}"),
            });
        };
        let Some(sec) = &section else {
            return Err(Error::Config {
                line,
                message: "key outside any section".into(),
            });
        };
        let key = (sec.clone(), k.trim().to_string());
        if let Some(prev) = map.get(&key) {
            let prev: &Entry = prev;
            return Err(Error::Config {
                line,
                message: format!("duplicate key {}.{} (first on line {})", key.0, key.1, prev.line),
            });
        }
        map.insert(
            key,
            Entry {
                line,
                value: v.trim().to_string(),
                used: false,
            },
        );
    }
    Ok(Entries { map })
}

fn parse_clip(s: &str) -> std::result::Result<Option<(f64, f64)>, String> {
    if s == "none" {
        return Ok(None);
    }
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi` or none, got {s:?}"))?;
    let lo = lo.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = hi.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Some((lo, hi)))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = tokenize(text)?;
        let mut c = ExperimentConfig::default();

        let (kind_line, kind) = e.require("dataset", "kind")?;
        c.training.dataset = match kind.as_str() {
            "ring" => {
                let (mut modes, mut radius, mut std) = (8usize, 2.0f64, 0.02f64);
                e.get("dataset", "modes", &mut modes)?;
                e.get("dataset", "radius", &mut radius)?;
                e.get("dataset", "std", &mut std)?;
                DatasetConfig::Ring { modes, radius, std }
            }
            "grid" => {
                let (mut side, mut spacing, mut std) = (5usize, 2.0f64, 0.05f64);
                e.get("dataset", "side", &mut side)?;
                e.get("dataset", "spacing", &mut spacing)?;
                e.get("dataset", "std", &mut std)?;
                DatasetConfig::Grid { side, spacing, std }
            }
            "patterns" => {
                let (mut patterns, mut side, mut quadrants, mut flip_prob, mut pattern_seed) = (8usize, 4usize, 3usize, 0.02f64, 0u64);
                e.get("dataset", "patterns", &mut patterns)?;
                e.get("dataset", "side", &mut side)?;
                e.get("dataset", "quadrants", &mut quadrants)?;
                e.get("dataset", "flip_prob", &mut flip_prob)?;
                e.get("dataset", "pattern_seed", &mut pattern_seed)?;
                DatasetConfig::Patterns {
                    patterns,
                    side,
                    quadrants,
                    flip_prob,
                    pattern_seed,
                }
            }
            other => {
                return Err(Error::Config {
                    line: kind_line,
                    message: format!("dataset.kind: expected ring, grid or patterns, got {other:?}"),
                })
            }
        };

        let m = &mut c.training.model;
        e.get("model", "latent_dim", &mut m.latent_dim)?;
        e.get_list("model", "gen_hidden", &mut m.gen_hidden)?;
        e.get_list("model", "disc_hidden", &mut m.disc_hidden)?;
        e.get_list("model", "ar_hidden", &mut m.ar_hidden)?;
        e.get_list("model", "clf_hidden", &mut m.clf_hidden)?;
        e.get("model", "ar_sigma", &mut m.ar_sigma)?;
        e.get("model", "init_std", &mut m.init_std)?;

        let (vline, variant) = e.require("training", "variant")?;
        let t = &mut c.training;
        t.variant = variant.parse::<Variant>().map_err(|err| Error::Config {
            line: vline,
            message: format!("training.variant: {err}"),
        })?;
        e.get("training", "steps", &mut t.steps)?;
        e.get("training", "batch", &mut t.batch)?;
        e.get("training", "learning_rate", &mut t.optimizer.learning_rate)?;
        e.get("training", "adam_beta1", &mut t.optimizer.beta1)?;
        e.get("training", "adam_beta2", &mut t.optimizer.beta2)?;
        e.get("training", "adam_eps", &mut t.optimizer.eps)?;
        e.get("training", "seed", &mut t.seed)?;
        if let Some(v) = e.parse_with("training", "ar_loss", |s| s.parse::<ArLoss>().map_err(|e| e.to_string()))? {
            t.ar_loss = v;
        }
        e.get_bool("training", "shared_z", &mut t.shared_z)?;
        e.get("training", "metrics_every", &mut t.metrics_every)?;

        let v = &mut c.evaluation;
        e.get("evaluation", "samples", &mut v.samples)?;
        e.get("evaluation", "min_count", &mut v.min_count)?;
        e.get("evaluation", "smoothing", &mut v.smoothing)?;
        e.get("evaluation", "classifier_train", &mut v.classifier_train)?;
        e.get("evaluation", "classifier_held_out", &mut v.classifier_held_out)?;
        e.get("evaluation", "classifier_epochs", &mut v.classifier.epochs)?;
        e.get("evaluation", "classifier_batch", &mut v.classifier.batch)?;
        e.get("evaluation", "classifier_learning_rate", &mut v.classifier.optimizer.learning_rate)?;
        e.get("evaluation", "classifier_beta1", &mut v.classifier.optimizer.beta1)?;

        let d = &mut c.defense;
        e.get("defense", "iterations", &mut d.projection.iterations)?;
        e.get("defense", "restarts", &mut d.projection.restarts)?;
        e.get("defense", "learning_rate", &mut d.projection.learning_rate)?;
        if let Some(k) = e.parse_with("defense", "attack", |s| s.parse::<AttackKind>().map_err(|e| e.to_string()))? {
            d.attack.kind = k;
        }
        e.get("defense", "epsilon", &mut d.attack.epsilon)?;
        e.get("defense", "pgd_steps", &mut d.attack.pgd_steps)?;
        e.get("defense", "pgd_step_size", &mut d.attack.pgd_step_size)?;
        e.get_bool("defense", "random_start", &mut d.attack.random_start)?;
        if let Some(clip) = e.parse_with("defense", "clip", parse_clip)? {
            d.attack.clip = clip;
        }
        e.get_list("defense", "iterations_grid", &mut d.iterations_grid)?;
        e.get_list("defense", "restarts_grid", &mut d.restarts_grid)?;
        e.get_list("defense", "seeds", &mut d.seeds)?;
        e.get("defense", "test_samples", &mut d.test_samples)?;

        if let Some(((sec, key), entry)) = e.map.iter().find(|(_, v)| !v.used) {
            return Err(Error::Config {
                line: entry.line,
                message: format!("unknown key {sec}.{key}"),
            });
        }
        c.sync();
        c.validate()?;
        Ok(c)
    }

    /// Copies the shared model settings into the classifier settings.
    pub fn sync(&mut self) {
        self.evaluation.classifier.hidden = self.training.model.clf_hidden.clone();
        self.evaluation.classifier.init_std = self.training.model.init_std;
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        self.defense.projection.validate()?;
        self.defense.attack.validate()?;
        let d = &self.defense;
        if d.iterations_grid.is_empty() || d.restarts_grid.is_empty() || d.seeds.is_empty() {
            return Err(Error::InvalidSpec("defense grids must be nonempty".into()));
        }
        if self.evaluation.samples == 0 {
            return Err(Error::InvalidSpec("evaluation.samples must be positive".into()));
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let t = &self.training;
        let _ = writeln!(s, "[dataset]");
        match &t.dataset {
            DatasetConfig::Ring { modes, radius, std } => {
                let _ = writeln!(s, "kind = ring\nmodes = {modes}\nradius = {}\nstd = {}", fmt_f64(*radius), fmt_f64(*std));
            }
            DatasetConfig::Grid { side, spacing, std } => {
                let _ = writeln!(s, "kind = grid\nside = {side}\nspacing = {}\nstd = {}", fmt_f64(*spacing), fmt_f64(*std));
            }
            DatasetConfig::Patterns {
                patterns,
                side,
                quadrants,
                flip_prob,
                pattern_seed,
            } => {
                let _ = writeln!(
                    s,
                    "kind = patterns\npatterns = {patterns}\nside = {side}\nquadrants = {quadrants}\nflip_prob = {}\npattern_seed = {pattern_seed}",
                    fmt_f64(*flip_prob)
                );
            }
        }
        let m = &t.model;
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "latent_dim = {}", m.latent_dim);
        let _ = writeln!(s, "gen_hidden = {}", join(&m.gen_hidden));
        let _ = writeln!(s, "disc_hidden = {}", join(&m.disc_hidden));
        let _ = writeln!(s, "ar_hidden = {}", join(&m.ar_hidden));
        let _ = writeln!(s, "clf_hidden = {}", join(&m.clf_hidden));
        let _ = writeln!(s, "ar_sigma = {}", fmt_f64(m.ar_sigma));
        let _ = writeln!(s, "init_std = {}", fmt_f64(m.init_std));

        let _ = writeln!(s, "\n[training]");
        let _ = writeln!(s, "variant = {}", t.variant);
        let _ = writeln!(s, "steps = {}", t.steps);
        let _ = writeln!(s, "batch = {}", t.batch);
        let _ = writeln!(s, "learning_rate = {}", fmt_f64(t.optimizer.learning_rate));
        let _ = writeln!(s, "adam_beta1 = {}", fmt_f64(t.optimizer.beta1));
        let _ = writeln!(s, "adam_beta2 = {}", fmt_f64(t.optimizer.beta2));
        let _ = writeln!(s, "adam_eps = {}", fmt_f64(t.optimizer.eps));
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "ar_loss = {}", t.ar_loss.as_str());
        let _ = writeln!(s, "shared_z = {}", t.shared_z);
        let _ = writeln!(s, "metrics_every = {}", t.metrics_every);

        let v = &self.evaluation;
        let _ = writeln!(s, "\n[evaluation]");
        let _ = writeln!(s, "samples = {}", v.samples);
        let _ = writeln!(s, "min_count = {}", v.min_count);
        let _ = writeln!(s, "smoothing = {}", fmt_f64(v.smoothing));
        let _ = writeln!(s, "classifier_train = {}", v.classifier_train);
        let _ = writeln!(s, "classifier_held_out = {}", v.classifier_held_out);
        let _ = writeln!(s, "classifier_epochs = {}", v.classifier.epochs);
        let _ = writeln!(s, "classifier_batch = {}", v.classifier.batch);
        let _ = writeln!(s, "classifier_learning_rate = {}", fmt_f64(v.classifier.optimizer.learning_rate));
        let _ = writeln!(s, "classifier_beta1 = {}", fmt_f64(v.classifier.optimizer.beta1));

        let d = &self.defense;
        let _ = writeln!(s, "\n[defense]");
        let _ = writeln!(s, "iterations = {}", d.projection.iterations);
        let _ = writeln!(s, "restarts = {}", d.projection.restarts);
        let _ = writeln!(s, "learning_rate = {}", fmt_f64(d.projection.learning_rate));
        let _ = writeln!(s, "attack = {}", d.attack.kind);
        let _ = writeln!(s, "epsilon = {}", fmt_f64(d.attack.epsilon));
        let _ = writeln!(s, "pgd_steps = {}", d.attack.pgd_steps);
        let _ = writeln!(s, "pgd_step_size = {}", fmt_f64(d.attack.pgd_step_size));
        let _ = writeln!(s, "random_start = {}", d.attack.random_start);
        match d.attack.clip {
            Some((lo, hi)) => {
                let _ = writeln!(s, "clip = {},{}", fmt_f64(lo), fmt_f64(hi));
            }
            None => {
                let _ = writeln!(s, "clip = none");
            }
        }
        let _ = writeln!(s, "iterations_grid = {}", join(&d.iterations_grid));
        let _ = writeln!(s, "restarts_grid = {}", join(&d.restarts_grid));
        let _ = writeln!(s, "seeds = {}", join(&d.seeds));
        let _ = writeln!(s, "test_samples = {}", d.test_samples);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "[dataset]\nkind = ring\n[training]\nvariant = hgan\n";

    #[test]
    fn minimal_file_takes_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.training.optimizer.learning_rate, 0.0002);
        assert_eq!(c.training.batch, 64);
        assert_eq!(c.training.optimizer.beta1, 0.5);
    }

    #[test]
    fn serialized_default_echoes_optimizer() {
        let s = ExperimentConfig::default().serialize();
        assert!(s.contains("learning_rate = 0.0002\n"));
        assert!(s.contains("batch = 64\n"));
        assert!(s.contains("adam_beta1 = 0.5\n"));
    }

    #[test]
    fn missing_key_is_named() {
        let err = ExperimentConfig::parse("[dataset]\nkind = ring\n").unwrap_err();
        assert!(matches!(&err, Error::MissingKey(k) if k == "training.variant"));
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::parse("[training]\nvariant = gan\n").unwrap_err();
        assert!(err.to_string().contains("dataset.kind"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "[dataset]\nkind = ring\n\n[training]\nvariant = hgan\nstepz = 3\n";
        match ExperimentConfig::parse(text).unwrap_err() {
            Error::Config { line, message } => {
                assert_eq!(line, 6);
                assert!(message.contains("training.stepz"));
            }
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse("[dataset]\nkind = ring\nside = 4\n[training]\nvariant = gan\n").unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse("[dataset]\nkind = ring\n[training]\nvariant = gan\nbatch = many\n").unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse("[oops]\n").unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let text = "[dataset]\nkind = ring\n[training]\nvariant = gan\nsteps = 0\n";
        assert_eq!(ExperimentConfig::parse(text).unwrap_err().exit_code(), 2);
    }

    fn sizes() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..300, 1..4)
    }

    fn finite() -> impl Strategy<Value = f64> {
        (1e-9f64..10.0).prop_map(|v| v)
    }

    prop_compose! {
        fn dataset()(which in 0..3usize, a in 1usize..12, b in 1usize..5, f in finite(), g in 0.0f64..0.49, s in any::<u64>()) -> DatasetConfig {
            match which {
                0 => DatasetConfig::Ring { modes: a, radius: f, std: g },
                1 => DatasetConfig::Grid { side: a, spacing: f, std: g },
                _ => DatasetConfig::Patterns { patterns: a + 1, side: b + 1, quadrants: if a % 2 == 0 { 1 } else { 3 }, flip_prob: g, pattern_seed: s },
            }
        }
    }

    prop_compose! {
        fn config()(
            ds in dataset(),
            hidden in (sizes(), sizes(), sizes(), sizes()),
            latent in 1usize..64,
            floats in prop::array::uniform8(finite()),
            variant in 0u32..3,
            steps in 1u64..1_000_000,
            batch in 1usize..512,
            seed in any::<u64>(),
            flags in (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()),
            counts in prop::array::uniform6(1usize..1000),
            grids in (prop::collection::vec(1usize..500, 1..5), prop::collection::vec(1usize..20, 1..3), prop::collection::vec(any::<u64>(), 1..4)),
            clip in prop::option::of((-1.0f64..0.0, 0.5f64..2.0)),
        ) -> ExperimentConfig {
            let mut c = ExperimentConfig::default();
            let t = &mut c.training;
            t.dataset = ds;
            t.model.latent_dim = latent;
            (t.model.gen_hidden, t.model.disc_hidden, t.model.ar_hidden, t.model.clf_hidden) = hidden;
            t.model.ar_sigma = floats[0];
            t.model.init_std = floats[1];
            t.variant = Variant::from_code(variant).unwrap();
            t.steps = steps;
            t.batch = batch;
            t.optimizer.learning_rate = floats[2];
            t.optimizer.beta1 = floats[3] / 10.0;
            t.seed = seed;
            t.ar_loss = if flags.0 { ArLoss::L1 } else { ArLoss::Nll };
            t.shared_z = flags.1;
            t.metrics_every = counts[0] as u64;
            c.evaluation.samples = counts[1];
            c.evaluation.min_count = counts[2] as u64;
            c.evaluation.smoothing = floats[4];
            c.evaluation.classifier.epochs = counts[3];
            c.evaluation.classifier.optimizer.learning_rate = floats[5];
            let d = &mut c.defense;
            d.projection.iterations = counts[4];
            d.projection.restarts = counts[5];
            d.projection.learning_rate = floats[6];
            d.attack.kind = if flags.2 { AttackKind::Fgsm } else { AttackKind::Pgd };
            d.attack.epsilon = floats[7];
            d.attack.random_start = flags.3;
            d.attack.clip = clip;
            (d.iterations_grid, d.restarts_grid, d.seeds) = grids;
            c.sync();
            c
        }
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(c in config()) {
            let text = c.serialize();
            let back = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
