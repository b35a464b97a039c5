//! Flat `key = value` run configuration with bracketed sections.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dynloc::lattice::Site;
use dynloc::{Error, Result};

/// `(section, key, default)`; the order here is the order of the echo.
const SCHEMA: &[(&str, &str, &str)] = &[
    ("lattice", "dimension", "1"),
    ("lattice", "extent", "201"),
    ("disorder", "kind", "iid-uniform"),
    ("disorder", "half_width", "4.0"),
    ("disorder", "radius", "0"),
    ("disorder", "density_file", ""),
    ("disorder", "samples", "20"),
    ("operator", "matrix_cap", "4096"),
    ("dynamics", "initial_site", "0"),
    ("dynamics", "filter", "true"),
    ("dynamics", "filter_lower", "-6.5"),
    ("dynamics", "filter_upper", "-1.5"),
    ("dynamics", "filter_margin", "0.1"),
    ("dynamics", "filter_ramp", "0.1"),
    ("dynamics", "propagation", "auto"),
    ("dynamics", "chebyshev_tolerance", "1e-12"),
    ("dynamics", "dt", "0.25"),
    ("dynamics", "t_max", "1000"),
    ("dynamics", "cesaro_t_min", "1"),
    ("dynamics", "cesaro_per_decade", "20"),
    ("dynamics", "leak_margin", "10"),
    ("dynamics", "leak_threshold", "1e-8"),
    ("dynamics", "expect", "none"),
    ("green", "gre_instances_1d", "20"),
    ("green", "gre_extent_1d", "65"),
    ("green", "gre_radius_1d", "8"),
    ("green", "gre_instances_2d", "5"),
    ("green", "gre_extent_2d", "21"),
    ("green", "gre_radius_2d", "3"),
    ("green", "gre_tolerance", "1e-10"),
    ("green", "residuum_extent", "65"),
    ("green", "residuum_epsilons", "1,0.1,0.01"),
    ("green", "residuum_pairs", "10"),
    ("green", "residuum_tolerance", "1e-3"),
    ("green", "regularity_radius", "8"),
    ("green", "regularity_energy", "-2.0"),
    ("green", "regularity_threshold", "0.01"),
    ("green", "regularity_realizations", "20"),
    ("green", "epsilon_min", "1e-6"),
    ("green", "probes_per_decade", "4"),
    ("msa", "variant", "m2"),
    ("msa", "scales", ""),
    ("msa", "l0", "8"),
    ("msa", "alpha", "1.5"),
    ("msa", "depth", "2"),
    ("msa", "energy", "-2.0"),
    ("msa", "rho", "algebraic"),
    ("msa", "m", "4"),
    ("msa", "nu", "0.5"),
    ("msa", "n", "5"),
    ("msa", "c_n", "1"),
    ("msa", "p", "2"),
    ("msa", "beta", "0"),
    ("msa", "realizations", "100"),
    ("msa", "confidence", "0.95"),
    ("msa", "interval_lower", "-2.1"),
    ("msa", "interval_upper", "-1.9"),
    ("estimators", "window_decades", "1"),
    ("estimators", "window_step", "0.5"),
    ("estimators", "fit_t_min", "1"),
    ("estimators", "bootstrap_resamples", "200"),
    ("estimators", "bootstrap_seed", "7"),
    ("estimators", "stability_threshold", "1.05"),
    ("estimators", "ballistic_tolerance", "0.02"),
    ("estimators", "abel_epsilons", "0.2,0.1,0.05"),
    ("estimators", "abel_realizations", "10"),
    ("estimators", "abel_rtol", "1e-8"),
    ("estimators", "wegner_energy", "-2.0"),
    ("estimators", "wegner_etas", "0.1,0.03,0.01,0.003"),
    ("estimators", "wegner_box_sites", "32"),
    ("estimators", "wegner_separation", "64"),
    ("estimators", "wegner_realizations", "200"),
    ("estimators", "wegner_power_tolerance", "0.2"),
    ("estimators", "wegner_max_spread", "3"),
    ("certificate", "alpha", "1.5"),
    ("certificate", "m", "33"),
    ("certificate", "w", "8"),
    ("certificate", "s", "4"),
    ("certificate", "n", "14"),
    ("certificate", "d", "1"),
    ("certificate", "k0", "10"),
    ("certificate", "theta", "3"),
    ("certificate", "p", "5.5"),
    ("certificate", "c_w", "1"),
    ("certificate", "interval_len", "1"),
    ("certificate", "c_nsd", "1"),
    ("certificate", "c_dn", "1"),
    ("certificate", "c_check", "1"),
    ("certificate", "ell", "6000"),
    ("certificate", "l0", "10"),
    ("certificate", "remark_n", "9"),
    ("execution", "workers", "1"),
    ("execution", "seed", "20240917"),
    ("execution", "enforce", "all"),
    ("output", "directory", "out"),
    ("output", "formats", "csv,json"),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// Source line, 0 for defaults and overrides.
    line: usize,
}

/// Parsed configuration with every schema key present.
#[derive(Debug, Clone)]
pub struct RunConfig {
    entries: BTreeMap<(String, String), Entry>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let entries = SCHEMA
            .iter()
            .map(|(s, k, v)| {
                (
                    (s.to_string(), k.to_string()),
                    Entry {
                        value: v.to_string(),
                        line: 0,
                    },
                )
            })
            .collect();
        Self { entries }
    }
}

fn known(section: &str, key: &str) -> bool {
    SCHEMA.iter().any(|(s, k, _)| *s == section && *k == key)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                    line,
                    message: format!("malformed section header '{content}'"),
                })?;
                let name = name.trim();
                if !SCHEMA.iter().any(|(s, _, _)| *s == name) {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown section [{name}]"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            let sec = section.as_deref().ok_or_else(|| Error::Config {
                line,
                message: format!("key '{key}' appears before any section header"),
            })?;
            if !known(sec, key) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key '{key}' in section [{sec}]"),
                });
            }
            cfg.entries.insert(
                (sec.to_string(), key.to_string()),
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Overrides one key, as for command-line flags.
    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) -> Result<()> {
        if !known(section, key) {
            return Err(Error::Config {
                line: 0,
                message: format!("unknown key '{key}' in section [{section}]"),
            });
        }
        self.entries.insert(
            (section.to_string(), key.to_string()),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    fn entry(&self, section: &str, key: &str) -> &Entry {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .unwrap_or_else(|| panic!("key {section}.{key} missing from schema"))
    }

    fn bad(&self, section: &str, key: &str, what: &str) -> Error {
        let e = self.entry(section, key);
        Error::Config {
            line: e.line,
            message: format!("{section}.{key} = '{}' is not {what}", e.value),
        }
    }

    pub fn str(&self, section: &str, key: &str) -> &str {
        &self.entry(section, key).value
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<f64> {
        self.str(section, key)
            .parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .ok_or_else(|| self.bad(section, key, "a number"))
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<u64> {
        self.str(section, key)
            .parse()
            .map_err(|_| self.bad(section, key, "a nonnegative integer"))
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<usize> {
        self.str(section, key)
            .parse()
            .map_err(|_| self.bad(section, key, "a nonnegative integer"))
    }

    pub fn bool(&self, section: &str, key: &str) -> Result<bool> {
        match self.str(section, key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.bad(section, key, "a boolean")),
        }
    }

    /// Comma-separated numbers; empty means an empty list.
    pub fn f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>> {
        let s = self.str(section, key);
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| self.bad(section, key, "a list of numbers")))
            .collect()
    }

    pub fn str_list(&self, section: &str, key: &str) -> Vec<String> {
        self.str(section, key)
            .split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect()
    }

    /// Site given by up to `d` comma-separated integers, padded with zeros.
    pub fn site(&self, section: &str, key: &str, dimension: usize) -> Result<Site> {
        let parts: Vec<i64> = self
            .str(section, key)
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.bad(section, key, "a site"))?;
        if parts.is_empty() || parts.len() > dimension {
            return Err(self.bad(section, key, &format!("a site with at most {dimension} coordinates")));
        }
        let mut s = [0i64; 3];
        s[..parts.len()].copy_from_slice(&parts);
        Ok(s)
    }

    /// Every key with its resolved value, in schema order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (s, k, _) in SCHEMA {
            if *s != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                current = s;
            }
            let _ = writeln!(out, "{k} = {}", self.str(s, k));
        }
        out
    }
}
