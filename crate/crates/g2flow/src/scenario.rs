//! Scenario configuration: line-oriented `key = value` with `[section]`
//! headers, no nesting.  `parse` and `print` round-trip exactly.
//!
//! ```text
//! [run]
//! system = torus            # torus | so3 | su2 | radial
//! seed = 42
//! threads = 0               # 0 = library default
//! [grid]
//! n = 32
//! length = 6.28318…         # torus/so3 grids
//! m = 257
//! r_min = 0.25              # radial grid
//! r_max = 4.0
//! [initial]
//! recipe = double_curl      # flat | double_curl | ma_potential | su2
//!                           # | radial_flat | radial_perturbed | snapshot
//! amplitude = 0.05          # double_curl, radial_perturbed
//! c = 2.0                   # double_curl posdef shift
//! hessian = 1 0 0 2 0 3     # ma_potential (11 12 13 22 23 33)
//! perturbation = 0.0        # ma_potential trig part
//! a_matrix = 1 0 0 0 1 0 0 0 1   # su2
//! s_matrix = 1 0 0 1 0 1         # su2
//! alpha = 1.0               # radial_flat / radial_perturbed
//! beta = 1.0
//! path = state.g2f          # snapshot
//! [time]
//! dt = 1e-3
//! t_final = 0.2
//! sample_every = 10
//! project_every = 0        # divergence projection cadence (torus; 0 = off)
//! [lapse]
//! mode = canonical          # canonical | dets_half
//! [guards]
//! det_s_min = 1e-8
//! positivity_min = 1e-8
//! initial_tol = 0.1
//! [output]
//! dir = out
//! snapshot_every = 0
//! ```

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Torus,
    So3,
    Su2,
    Radial,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Torus => "torus",
            SystemKind::So3 => "so3",
            SystemKind::Su2 => "su2",
            SystemKind::Radial => "radial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialRecipe {
    Flat,
    DoubleCurl {
        amplitude: f64,
        c: f64,
    },
    MaPotential {
        hessian: [f64; 6],
        perturbation: f64,
    },
    Su2 {
        a_matrix: [f64; 9],
        s_matrix: [f64; 6],
    },
    RadialFlat {
        alpha: f64,
        beta: f64,
    },
    RadialPerturbed {
        alpha: f64,
        beta: f64,
        amplitude: f64,
    },
    Snapshot {
        path: String,
    },
}

impl InitialRecipe {
    pub fn name(&self) -> &'static str {
        match self {
            InitialRecipe::Flat => "flat",
            InitialRecipe::DoubleCurl { .. } => "double_curl",
            InitialRecipe::MaPotential { .. } => "ma_potential",
            InitialRecipe::Su2 { .. } => "su2",
            InitialRecipe::RadialFlat { .. } => "radial_flat",
            InitialRecipe::RadialPerturbed { .. } => "radial_perturbed",
            InitialRecipe::Snapshot { .. } => "snapshot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LapseKind {
    Canonical,
    /// Explicit lapse field set to `(det S)^{1/2}` (exercises the explicit
    /// code path; equal to canonical by construction).
    DetsHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemKind,
    pub seed: u64,
    pub threads: usize,
    // periodic grid
    pub n: usize,
    pub length: f64,
    // radial grid
    pub m: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub initial: InitialRecipe,
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
    /// Apply the divergence projection every this many steps (torus runs;
    /// 0 = off, the default: drift is measured, not hidden).
    pub project_every: usize,
    pub lapse: LapseKind,
    pub det_s_min: f64,
    pub positivity_min: f64,
    pub initial_tol: f64,
    pub output_dir: String,
    pub snapshot_every: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            system: SystemKind::Torus,
            seed: 0,
            threads: 0,
            n: 32,
            length: crate::grids::DEFAULT_LEN,
            m: 257,
            r_min: 0.25,
            r_max: 4.0,
            initial: InitialRecipe::Flat,
            dt: 1e-3,
            t_final: 0.2,
            sample_every: 10,
            project_every: 0,
            lapse: LapseKind::Canonical,
            det_s_min: 1e-8,
            positivity_min: 1e-8,
            initial_tol: 0.1,
            output_dir: "out".into(),
            snapshot_every: 0,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips
    let s = format!("{v}");
    if s.parse::<f64>() == Ok(v) {
        s
    } else {
        format!("{v:.17e}")
    }
}

impl Scenario {
    /// Parse from the config text; errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut sections: BTreeMap<String, Vec<(usize, String, String)>> = BTreeMap::new();
        let mut current = String::from("run");
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Config {
                        line: line_no,
                        msg: "unterminated section header".into(),
                    });
                }
                current = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("expected key = value, got `{line}`"),
                });
            };
            sections.entry(current.clone()).or_default().push((
                line_no,
                k.trim().to_string(),
                v.trim().to_string(),
            ));
        }

        let mut sc = Scenario::default();
        let mut recipe_name: Option<String> = None;
        let mut recipe_keys: BTreeMap<String, (usize, String)> = BTreeMap::new();

        for (section, entries) in &sections {
            for (line, key, value) in entries {
                let line = *line;
                let parse_f64 = |v: &str| -> Result<f64> {
                    v.parse().map_err(|_| Error::Config {
                        line,
                        msg: format!("`{v}` is not a number"),
                    })
                };
                let parse_usize = |v: &str| -> Result<usize> {
                    v.parse().map_err(|_| Error::Config {
                        line,
                        msg: format!("`{v}` is not a non-negative integer"),
                    })
                };
                match (section.as_str(), key.as_str()) {
                    ("run", "system") => {
                        sc.system = match value.as_str() {
                            "torus" => SystemKind::Torus,
                            "so3" => SystemKind::So3,
                            "su2" => SystemKind::Su2,
                            "radial" => SystemKind::Radial,
                            other => {
                                return Err(Error::Config {
                                    line,
                                    msg: format!("unknown system `{other}`"),
                                })
                            }
                        }
                    }
                    ("run", "seed") => {
                        sc.seed = value.parse().map_err(|_| Error::Config {
                            line,
                            msg: format!("`{value}` is not a seed"),
                        })?
                    }
                    ("run", "threads") => sc.threads = parse_usize(value)?,
                    ("grid", "n") => sc.n = parse_usize(value)?,
                    ("grid", "length") => sc.length = parse_f64(value)?,
                    ("grid", "m") => sc.m = parse_usize(value)?,
                    ("grid", "r_min") => sc.r_min = parse_f64(value)?,
                    ("grid", "r_max") => sc.r_max = parse_f64(value)?,
                    ("initial", "recipe") => recipe_name = Some(value.clone()),
                    ("initial", _) => {
                        recipe_keys.insert(key.clone(), (line, value.clone()));
                    }
                    ("time", "dt") => sc.dt = parse_f64(value)?,
                    ("time", "t_final") => sc.t_final = parse_f64(value)?,
                    ("time", "sample_every") => sc.sample_every = parse_usize(value)?,
                    ("time", "project_every") => sc.project_every = parse_usize(value)?,
                    ("lapse", "mode") => {
                        sc.lapse = match value.as_str() {
                            "canonical" => LapseKind::Canonical,
                            "dets_half" => LapseKind::DetsHalf,
                            other => {
                                return Err(Error::Config {
                                    line,
                                    msg: format!("unknown lapse mode `{other}`"),
                                })
                            }
                        }
                    }
                    ("guards", "det_s_min") => sc.det_s_min = parse_f64(value)?,
                    ("guards", "positivity_min") => sc.positivity_min = parse_f64(value)?,
                    ("guards", "initial_tol") => sc.initial_tol = parse_f64(value)?,
                    ("output", "dir") => sc.output_dir = value.clone(),
                    ("output", "snapshot_every") => sc.snapshot_every = parse_usize(value)?,
                    (s, k) => {
                        return Err(Error::Config {
                            line,
                            msg: format!("unknown key `{k}` in section [{s}]"),
                        })
                    }
                }
            }
        }

        let get_f64 =
            |keys: &BTreeMap<String, (usize, String)>, k: &str, default: f64| -> Result<f64> {
                match keys.get(k) {
                    None => Ok(default),
                    Some((line, v)) => v.parse().map_err(|_| Error::Config {
                        line: *line,
                        msg: format!("`{v}` is not a number"),
                    }),
                }
            };
        let get_floats = |keys: &BTreeMap<String, (usize, String)>,
                          k: &str,
                          n: usize|
         -> Result<Option<Vec<f64>>> {
            match keys.get(k) {
                None => Ok(None),
                Some((line, v)) => {
                    let vals: std::result::Result<Vec<f64>, _> =
                        v.split_whitespace().map(|t| t.parse()).collect();
                    let vals = vals.map_err(|_| Error::Config {
                        line: *line,
                        msg: format!("`{v}` is not a float list"),
                    })?;
                    if vals.len() != n {
                        return Err(Error::Config {
                            line: *line,
                            msg: format!("expected {n} floats, got {}", vals.len()),
                        });
                    }
                    Ok(Some(vals))
                }
            }
        };

        let name = recipe_name.unwrap_or_else(|| "flat".to_string());
        sc.initial = match name.as_str() {
            "flat" => InitialRecipe::Flat,
            "double_curl" => InitialRecipe::DoubleCurl {
                amplitude: get_f64(&recipe_keys, "amplitude", 0.05)?,
                c: get_f64(&recipe_keys, "c", 2.0)?,
            },
            "ma_potential" => {
                let h = get_floats(&recipe_keys, "hessian", 6)?
                    .unwrap_or_else(|| vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
                InitialRecipe::MaPotential {
                    hessian: h.try_into().unwrap(),
                    perturbation: get_f64(&recipe_keys, "perturbation", 0.0)?,
                }
            }
            "su2" => {
                let a = get_floats(&recipe_keys, "a_matrix", 9)?
                    .unwrap_or_else(|| vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
                let s = get_floats(&recipe_keys, "s_matrix", 6)?
                    .unwrap_or_else(|| vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
                InitialRecipe::Su2 {
                    a_matrix: a.try_into().unwrap(),
                    s_matrix: s.try_into().unwrap(),
                }
            }
            "radial_flat" => InitialRecipe::RadialFlat {
                alpha: get_f64(&recipe_keys, "alpha", 1.0)?,
                beta: get_f64(&recipe_keys, "beta", 1.0)?,
            },
            "radial_perturbed" => InitialRecipe::RadialPerturbed {
                alpha: get_f64(&recipe_keys, "alpha", 1.0)?,
                beta: get_f64(&recipe_keys, "beta", 1.0)?,
                amplitude: get_f64(&recipe_keys, "amplitude", 1e-2)?,
            },
            "snapshot" => InitialRecipe::Snapshot {
                path: recipe_keys
                    .get("path")
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| Error::Config {
                        line: 0,
                        msg: "snapshot recipe needs a path".into(),
                    })?,
            },
            other => {
                return Err(Error::Config {
                    line: 0,
                    msg: format!("unknown recipe `{other}`"),
                })
            }
        };

        sc.validate()?;
        Ok(sc)
    }

    fn validate(&self) -> Result<()> {
        let ok = matches!(
            (self.system, &self.initial),
            (SystemKind::Torus, InitialRecipe::Flat)
                | (SystemKind::Torus, InitialRecipe::DoubleCurl { .. })
                | (SystemKind::Torus, InitialRecipe::MaPotential { .. })
                | (SystemKind::Torus, InitialRecipe::Snapshot { .. })
                | (SystemKind::So3, InitialRecipe::Flat)
                | (SystemKind::So3, InitialRecipe::Snapshot { .. })
                | (SystemKind::Su2, InitialRecipe::Su2 { .. })
                | (SystemKind::Su2, InitialRecipe::Snapshot { .. })
                | (SystemKind::Radial, InitialRecipe::RadialFlat { .. })
                | (SystemKind::Radial, InitialRecipe::RadialPerturbed { .. })
                | (SystemKind::Radial, InitialRecipe::Snapshot { .. })
        );
        if !ok {
            return Err(Error::Config {
                line: 0,
                msg: format!(
                    "recipe `{}` does not fit system `{}`",
                    self.initial.name(),
                    self.system.name()
                ),
            });
        }
        if self.dt <= 0.0 || self.t_final < 0.0 {
            return Err(Error::Config {
                line: 0,
                msg: "dt must be > 0, t_final ≥ 0".into(),
            });
        }
        Ok(())
    }

    /// Normalized config text; `parse(print(s)) == s`.
    pub fn print(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "system = {}", self.system.name());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "threads = {}", self.threads);
        let _ = writeln!(out, "[grid]");
        match self.system {
            SystemKind::Radial => {
                let _ = writeln!(out, "m = {}", self.m);
                let _ = writeln!(out, "r_min = {}", fmt_f64(self.r_min));
                let _ = writeln!(out, "r_max = {}", fmt_f64(self.r_max));
            }
            SystemKind::Su2 => {}
            _ => {
                let _ = writeln!(out, "n = {}", self.n);
                let _ = writeln!(out, "length = {}", fmt_f64(self.length));
            }
        }
        let _ = writeln!(out, "[initial]");
        let _ = writeln!(out, "recipe = {}", self.initial.name());
        match &self.initial {
            InitialRecipe::Flat => {}
            InitialRecipe::DoubleCurl { amplitude, c } => {
                let _ = writeln!(out, "amplitude = {}", fmt_f64(*amplitude));
                let _ = writeln!(out, "c = {}", fmt_f64(*c));
            }
            InitialRecipe::MaPotential {
                hessian,
                perturbation,
            } => {
                let h: Vec<String> = hessian.iter().map(|v| fmt_f64(*v)).collect();
                let _ = writeln!(out, "hessian = {}", h.join(" "));
                let _ = writeln!(out, "perturbation = {}", fmt_f64(*perturbation));
            }
            InitialRecipe::Su2 { a_matrix, s_matrix } => {
                let a: Vec<String> = a_matrix.iter().map(|v| fmt_f64(*v)).collect();
                let s: Vec<String> = s_matrix.iter().map(|v| fmt_f64(*v)).collect();
                let _ = writeln!(out, "a_matrix = {}", a.join(" "));
                let _ = writeln!(out, "s_matrix = {}", s.join(" "));
            }
            InitialRecipe::RadialFlat { alpha, beta } => {
                let _ = writeln!(out, "alpha = {}", fmt_f64(*alpha));
                let _ = writeln!(out, "beta = {}", fmt_f64(*beta));
            }
            InitialRecipe::RadialPerturbed {
                alpha,
                beta,
                amplitude,
            } => {
                let _ = writeln!(out, "alpha = {}", fmt_f64(*alpha));
                let _ = writeln!(out, "beta = {}", fmt_f64(*beta));
                let _ = writeln!(out, "amplitude = {}", fmt_f64(*amplitude));
            }
            InitialRecipe::Snapshot { path } => {
                let _ = writeln!(out, "path = {path}");
            }
        }
        let _ = writeln!(out, "[time]");
        let _ = writeln!(out, "dt = {}", fmt_f64(self.dt));
        let _ = writeln!(out, "t_final = {}", fmt_f64(self.t_final));
        let _ = writeln!(out, "sample_every = {}", self.sample_every);
        let _ = writeln!(out, "project_every = {}", self.project_every);
        let _ = writeln!(out, "[lapse]");
        let _ = writeln!(
            out,
            "mode = {}",
            match self.lapse {
                LapseKind::Canonical => "canonical",
                LapseKind::DetsHalf => "dets_half",
            }
        );
        let _ = writeln!(out, "[guards]");
        let _ = writeln!(out, "det_s_min = {}", fmt_f64(self.det_s_min));
        let _ = writeln!(out, "positivity_min = {}", fmt_f64(self.positivity_min));
        let _ = writeln!(out, "initial_tol = {}", fmt_f64(self.initial_tol));
        let _ = writeln!(out, "[output]");
        let _ = writeln!(out, "dir = {}", self.output_dir);
        let _ = writeln!(out, "snapshot_every = {}", self.snapshot_every);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal() {
        let sc = Scenario::parse("[run]\nsystem = torus\n[initial]\nrecipe = flat\n").unwrap();
        assert_eq!(sc.system, SystemKind::Torus);
        assert_eq!(sc.initial, InitialRecipe::Flat);
        assert_eq!(sc.n, 32);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Scenario::parse("[run]\nsystem = torus\nbogus_line\n").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 3),
            _ => panic!(),
        }
        let err = Scenario::parse("[run]\nsystem = torus\nnope = 3\n").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 3),
            _ => panic!(),
        }
        let err = Scenario::parse("[run]\nsystem = whatever\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
    }

    #[test]
    fn recipe_system_mismatch_rejected() {
        let err = Scenario::parse("[run]\nsystem = radial\n[initial]\nrecipe = flat\n");
        assert!(err.is_err());
    }

    #[test]
    fn roundtrip_all_recipes() {
        let texts = [
            "[run]\nsystem = torus\nseed = 9\n[initial]\nrecipe = double_curl\namplitude = 0.07\nc = 2.5\n[time]\ndt = 0.002\nt_final = 0.1\n",
            "[run]\nsystem = torus\n[initial]\nrecipe = ma_potential\nhessian = 1 0 0 2 0 3\n",
            "[run]\nsystem = su2\n[initial]\nrecipe = su2\na_matrix = 1 0 0 0 2 0 0 0 3\ns_matrix = 1 0 0 1 0 1\n",
            "[run]\nsystem = radial\n[initial]\nrecipe = radial_flat\nalpha = 1\nbeta = 1\n",
            "[run]\nsystem = radial\n[initial]\nrecipe = radial_perturbed\namplitude = 0.01\n",
        ];
        for text in texts {
            let sc = Scenario::parse(text).unwrap();
            let printed = sc.print();
            let sc2 = Scenario::parse(&printed).unwrap();
            assert_eq!(sc, sc2, "round-trip failed for:\n{text}");
            assert_eq!(printed, sc2.print());
        }
    }
}
