//! The shared field snapshot format (`.g2f`).
//!
//! A text header of `key = value` lines, the marker line `==binary==`, then
//! the payload as little-endian 8-byte IEEE-754 floats in site-major,
//! component-minor order.  Per-site component layouts:
//!
//! | kind    | keys                    | components                      |
//! |---------|-------------------------|---------------------------------|
//! | scalar3 | n, L, time              | 1                               |
//! | torus   | n, L, time, coframe (9) | 15: a (9, rows `a^i_c`), S (6)  |
//! | so3     | n, L, time              | 24: e (9), a (9), S (6)         |
//! | radial  | m, r_min, r_max, time   | 4: f, g, k, l                   |
//! | su2     | m = 1, time             | 15: A (9), S (6)                |
//!
//! Symmetric components are ordered (11, 12, 13, 22, 23, 33).

use crate::grids::{ConnField3, Mat3Field3, PeriodicGrid3, RadialGrid1, SymMatField3};
use crate::linalg3::{Mat3, SymMat3};
use crate::so3_flow::{RadialState, So3State, Su2State};
use crate::torus_flow::TorusState;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::io::{Read as _, Write as _};
use std::path::Path;

/// In-memory snapshot payloads.
#[derive(Debug, Clone)]
pub enum Snapshot {
    Scalar3 {
        n: usize,
        len: f64,
        time: f64,
        data: Vec<f64>,
    },
    Torus(TorusState),
    So3(So3State),
    Radial(RadialState),
    Su2(Su2State),
}

impl Snapshot {
    pub fn kind(&self) -> &'static str {
        match self {
            Snapshot::Scalar3 { .. } => "scalar3",
            Snapshot::Torus(_) => "torus",
            Snapshot::So3(_) => "so3",
            Snapshot::Radial(_) => "radial",
            Snapshot::Su2(_) => "su2",
        }
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

fn payload_and_header(snap: &Snapshot) -> (String, Vec<f64>) {
    let mut h = String::new();
    let mut push = |k: &str, v: String| {
        let _ = writeln!(h, "{k} = {v}");
    };
    match snap {
        Snapshot::Scalar3 { n, len, time, data } => {
            push("kind", "scalar3".into());
            push("n", n.to_string());
            push("L", fmt_f64(*len));
            push("components", "1".into());
            push("time", fmt_f64(*time));
            (h, data.clone())
        }
        Snapshot::Torus(st) => {
            push("kind", "torus".into());
            push("n", st.grid.n().to_string());
            push("L", fmt_f64(st.grid.len()));
            push("components", "15".into());
            push("time", fmt_f64(st.t));
            let cof: Vec<String> = st.e.0.iter().flatten().map(|v| fmt_f64(*v)).collect();
            push("coframe", cof.join(" "));
            let sites = st.grid.sites();
            let mut data = Vec::with_capacity(15 * sites);
            for site in 0..sites {
                for c in 0..9 {
                    data.push(st.a.at(c, site));
                }
                for c in 0..6 {
                    data.push(st.s.at(c, site));
                }
            }
            (h, data)
        }
        Snapshot::So3(st) => {
            push("kind", "so3".into());
            push("n", st.grid.n().to_string());
            push("L", fmt_f64(st.grid.len()));
            push("components", "24".into());
            push("time", fmt_f64(st.t));
            let sites = st.grid.sites();
            let mut data = Vec::with_capacity(24 * sites);
            for site in 0..sites {
                for c in 0..9 {
                    data.push(st.e.at(c, site));
                }
                for c in 0..9 {
                    data.push(st.a.at(c, site));
                }
                for c in 0..6 {
                    data.push(st.s.at(c, site));
                }
            }
            (h, data)
        }
        Snapshot::Radial(st) => {
            push("kind", "radial".into());
            push("m", st.grid.m().to_string());
            push("r_min", fmt_f64(st.grid.r_min()));
            push("r_max", fmt_f64(st.grid.r_max()));
            push("components", "4".into());
            push("time", fmt_f64(st.t));
            let mut data = Vec::with_capacity(4 * st.grid.m());
            for i in 0..st.grid.m() {
                data.extend_from_slice(&[st.f[i], st.g[i], st.k[i], st.l[i]]);
            }
            (h, data)
        }
        Snapshot::Su2(st) => {
            push("kind", "su2".into());
            push("m", "1".into());
            push("components", "15".into());
            push("time", fmt_f64(st.t));
            let mut data = Vec::with_capacity(15);
            for row in st.a.0.iter() {
                data.extend_from_slice(row);
            }
            data.extend_from_slice(&st.s.0);
            (h, data)
        }
    }
}

/// Write a snapshot file.
pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let (header, payload) = payload_and_header(snap);
    let mut file = std::fs::File::create(path)?;
    file.write_all(header.as_bytes())?;
    file.write_all(b"==binary==\n")?;
    let mut bytes = Vec::with_capacity(8 * payload.len());
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes)?;
    Ok(())
}

struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Io(format!("snapshot header missing key `{key}`")))
    }

    fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Io(format!("snapshot header key `{key}` is not a number")))
    }

    fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Io(format!("snapshot header key `{key}` is not an integer")))
    }
}

fn split_file(path: &Path) -> Result<(Header, Vec<f64>)> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let marker = b"==binary==\n";
    let pos = raw
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Io("snapshot has no ==binary== marker".into()))?;
    let header_text = std::str::from_utf8(&raw[..pos])
        .map_err(|_| Error::Io("snapshot header is not UTF-8".into()))?;
    let mut entries = Vec::new();
    for line in header_text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Io(format!("malformed header line `{line}`")))?;
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    let body = &raw[pos + marker.len()..];
    if body.len() % 8 != 0 {
        return Err(Error::Io(
            "snapshot payload is not a multiple of 8 bytes".into(),
        ));
    }
    let payload: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((Header { entries }, payload))
}

/// Read a snapshot file.
pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let (header, payload) = split_file(path)?;
    let kind = header.get("kind")?.to_string();
    let components = header.get_usize("components")?;
    let expect_len = |sites: usize| -> Result<()> {
        if payload.len() != sites * components {
            return Err(Error::Io(format!(
                "payload has {} floats, expected {} sites × {} components",
                payload.len(),
                sites,
                components
            )));
        }
        Ok(())
    };
    match kind.as_str() {
        "scalar3" => {
            let n = header.get_usize("n")?;
            expect_len(n * n * n)?;
            Ok(Snapshot::Scalar3 {
                n,
                len: header.get_f64("L")?,
                time: header.get_f64("time")?,
                data: payload,
            })
        }
        "torus" => {
            let n = header.get_usize("n")?;
            let grid = PeriodicGrid3::new(n, header.get_f64("L")?)?;
            expect_len(grid.sites())?;
            let cof: Vec<f64> = header
                .get("coframe")?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Io("bad coframe entry".into())))
                .collect::<Result<_>>()?;
            if cof.len() != 9 {
                return Err(Error::Io("coframe must have 9 entries".into()));
            }
            let mut e = Mat3::ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    e.0[i][j] = cof[3 * i + j];
                }
            }
            let mut a = ConnField3::zeros(grid);
            let mut s = SymMatField3::zeros(grid);
            for site in 0..grid.sites() {
                for c in 0..9 {
                    a.set(c, site, payload[site * 15 + c]);
                }
                for c in 0..6 {
                    s.set(c, site, payload[site * 15 + 9 + c]);
                }
            }
            Ok(Snapshot::Torus(TorusState {
                grid,
                e,
                a,
                s,
                t: header.get_f64("time")?,
            }))
        }
        "so3" => {
            let n = header.get_usize("n")?;
            let grid = PeriodicGrid3::new(n, header.get_f64("L")?)?;
            expect_len(grid.sites())?;
            let mut e = Mat3Field3::zeros(grid);
            let mut a = ConnField3::zeros(grid);
            let mut s = SymMatField3::zeros(grid);
            for site in 0..grid.sites() {
                for c in 0..9 {
                    e.set(c, site, payload[site * 24 + c]);
                    a.set(c, site, payload[site * 24 + 9 + c]);
                }
                for c in 0..6 {
                    s.set(c, site, payload[site * 24 + 18 + c]);
                }
            }
            Ok(Snapshot::So3(So3State {
                grid,
                e,
                a,
                s,
                t: header.get_f64("time")?,
            }))
        }
        "radial" => {
            let m = header.get_usize("m")?;
            let grid = RadialGrid1::new(header.get_f64("r_min")?, header.get_f64("r_max")?, m)?;
            expect_len(m)?;
            let mut st = RadialState {
                grid,
                f: vec![0.0; m],
                g: vec![0.0; m],
                k: vec![0.0; m],
                l: vec![0.0; m],
                t: header.get_f64("time")?,
            };
            for i in 0..m {
                st.f[i] = payload[4 * i];
                st.g[i] = payload[4 * i + 1];
                st.k[i] = payload[4 * i + 2];
                st.l[i] = payload[4 * i + 3];
            }
            Ok(Snapshot::Radial(st))
        }
        "su2" => {
            expect_len(1)?;
            let mut a = Mat3::ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    a.0[i][j] = payload[3 * i + j];
                }
            }
            let mut s = SymMat3::default();
            s.0.copy_from_slice(&payload[9..15]);
            Ok(Snapshot::Su2(Su2State {
                a,
                s,
                t: header.get_f64("time")?,
            }))
        }
        other => Err(Error::Io(format!("unknown snapshot kind `{other}`"))),
    }
}

/// Human-readable description (header plus per-component ranges) for the
/// `info` subcommand.
pub fn describe(path: &Path) -> Result<String> {
    let (header, payload) = split_file(path)?;
    let components = header.get_usize("components")?;
    let mut out = String::new();
    for (k, v) in &header.entries {
        let _ = writeln!(out, "{k} = {v}");
    }
    let sites = payload.len().checked_div(components).unwrap_or(0);
    let _ = writeln!(out, "sites = {sites}");
    for c in 0..components {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..sites {
            let v = payload[s * components + c];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let _ = writeln!(out, "component {c}: min = {lo:.6e}, max = {hi:.6e}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::DEFAULT_LEN;
    use crate::torus_flow::double_curl_state;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn torus_roundtrip() {
        let g = PeriodicGrid3::new(8, DEFAULT_LEN).unwrap();
        let mut rng = StdRng::seed_from_u64(61);
        let st = double_curl_state(g, &mut rng, 0.05, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap_0.g2f");
        write_snapshot(&path, &Snapshot::Torus(st.clone())).unwrap();
        let back = read_snapshot(&path).unwrap();
        match back {
            Snapshot::Torus(st2) => {
                assert_eq!(st2.a, st.a);
                assert_eq!(st2.s, st.s);
                assert_eq!(st2.e, st.e);
                assert_eq!(st2.t, st.t);
            }
            _ => panic!("wrong kind"),
        }
        let info = describe(&path).unwrap();
        assert!(info.contains("kind = torus"));
        assert!(info.contains("component 14"));
    }

    #[test]
    fn radial_and_su2_roundtrip() {
        let grid = crate::grids::RadialGrid1::new(0.25, 4.0, 17).unwrap();
        let st = crate::so3_flow::radial_flat(grid, 1.0, 1.0, 0.25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.g2f");
        write_snapshot(&path, &Snapshot::Radial(st.clone())).unwrap();
        match read_snapshot(&path).unwrap() {
            Snapshot::Radial(st2) => assert_eq!(st2, st),
            _ => panic!(),
        }

        let su2 = Su2State {
            a: Mat3::diag(1.0, 2.0, 3.0),
            s: SymMat3::diag(1.5, 1.0, 0.5),
            t: 0.125,
        };
        let path = dir.path().join("s.g2f");
        write_snapshot(&path, &Snapshot::Su2(su2)).unwrap();
        match read_snapshot(&path).unwrap() {
            Snapshot::Su2(st2) => {
                assert_eq!(st2.a, su2.a);
                assert_eq!(st2.s, su2.s);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn malformed_files_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.g2f");
        std::fs::write(&path, b"kind = torus\nno marker here").unwrap();
        assert!(read_snapshot(&path).is_err());
        std::fs::write(&path, b"kind = nosuch\ncomponents = 1\n==binary==\n").unwrap();
        assert!(read_snapshot(&path).is_err());
    }
}
