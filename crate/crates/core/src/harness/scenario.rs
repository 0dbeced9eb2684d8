//! Flat `key = value` scenario files with `[name]` sections, and the
//! closed-form tokens they use for coefficients.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::forward::{Profile, SourceSpec};
use crate::geometry::field::{ScalarFn, SpaceTimeField};
use crate::grid::{Point, SpaceTimeGrid, SpatialDomain};

const REGISTRY: &str = include_str!("scenarios.cfg");

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

fn parse_sections(text: &str) -> Result<Vec<(String, BTreeMap<String, String>)>> {
    let mut out: Vec<(String, BTreeMap<String, String>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            out.push((name.trim().to_string(), BTreeMap::new()));
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(LabError::Config(format!("line {}: expected key = value", n + 1)));
        };
        let Some(section) = out.last_mut() else {
            return Err(LabError::Config(format!("line {}: key outside a section", n + 1)));
        };
        section.1.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn defaults() -> BTreeMap<String, String> {
    parse_sections(REGISTRY)
        .expect("shipped registry parses")
        .into_iter()
        .find(|(n, _)| n == "defaults")
        .map(|(_, m)| m)
        .unwrap_or_default()
}

fn with_defaults(name: &str, own: BTreeMap<String, String>) -> Result<Scenario> {
    let mut params = defaults();
    for (k, v) in own {
        if !params.contains_key(&k) {
            return Err(LabError::Config(format!("scenario '{name}': unknown key '{k}'")));
        }
        params.insert(k, v);
    }
    Ok(Scenario {
        name: name.to_string(),
        params,
    })
}

/// Registered scenarios in file order.
pub fn registry() -> Vec<Scenario> {
    parse_sections(REGISTRY)
        .expect("shipped registry parses")
        .into_iter()
        .filter(|(n, _)| n != "defaults")
        .map(|(n, m)| with_defaults(&n, m).expect("shipped scenarios use known keys"))
        .collect()
}

/// `(name, description, expectation)` of every registered scenario.
pub fn list_scenarios() -> Vec<(String, String, String)> {
    registry()
        .into_iter()
        .map(|s| {
            let d = s.params["description"].clone();
            let e = s.params["expect"].clone();
            (s.name, d, e)
        })
        .collect()
}

impl Scenario {
    /// A registered name, or a path to a `.cfg` file holding one section.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(s) = registry().into_iter().find(|s| s.name == name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if path.extension().is_some_and(|e| e == "cfg") && path.is_file() {
            let text = std::fs::read_to_string(path)?;
            let mut sections: Vec<_> = parse_sections(&text)?
                .into_iter()
                .filter(|(n, _)| n != "defaults")
                .collect();
            if sections.len() != 1 {
                return Err(LabError::Config(format!(
                    "{}: expected exactly one scenario section, found {}",
                    path.display(),
                    sections.len()
                )));
            }
            let (n, m) = sections.remove(0);
            return with_defaults(&n, m);
        }
        Err(LabError::UnknownScenario(name_or_path.to_string()))
    }

    /// Applies `key=value` overrides; keys must already exist.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let Some((k, v)) = o.split_once('=') else {
                return Err(LabError::BadOverride(o.to_string()));
            };
            let k = k.trim();
            match self.params.get_mut(k) {
                Some(slot) => *slot = v.trim().to_string(),
                None => return Err(LabError::BadOverride(o.to_string())),
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.params
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| LabError::Config(format!("missing key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| LabError::Config(format!("{key} = '{v}' is not a number")))
    }

    /// `None` for `auto`.
    pub fn f64_or_auto(&self, key: &str) -> Result<Option<f64>> {
        if self.get(key)? == "auto" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| LabError::Config(format!("{key} = '{v}' is not a count")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| LabError::Config(format!("{key}: '{t}' is not a number")))
            })
            .collect()
    }

    pub fn dim(&self) -> Result<usize> {
        match self.usize("dim")? {
            d @ (1 | 2) => Ok(d),
            d => Err(LabError::Config(format!("dim = {d}, expected 1 or 2"))),
        }
    }

    pub fn domain_with(&self, nx_key: &str, ny_key: &str) -> Result<SpatialDomain> {
        let xr = self.list("x_range")?;
        let yr = self.list("y_range")?;
        if xr.len() != 2 || yr.len() != 2 {
            return Err(LabError::Config("ranges need two numbers".into()));
        }
        if self.dim()? == 1 {
            SpatialDomain::interval(xr[0], xr[1], self.usize(nx_key)?)
        } else {
            SpatialDomain::rectangle([xr[0], yr[0]], [xr[1], yr[1]], [self.usize(nx_key)?, self.usize(ny_key)?])
        }
    }

    pub fn grid_with(&self, nx_key: &str, ny_key: &str, nt_key: &str) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.domain_with(nx_key, ny_key)?, self.usize(nt_key)?, self.f64("t_final")?)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        self.grid_with("nx", "ny", "nt")
    }

    pub fn field(&self) -> Result<SpaceTimeField> {
        let dim = self.dim()?;
        let (a0, a0_ti) = scalar_token(self.get("a0")?, dim)?;
        let (a, a_ti) = vector_token(self.get("a")?, dim)?;
        let f = SpaceTimeField::new(
            dim,
            move |x, t| a0(x, t),
            move |x, t| a(x, t),
            self.f64("rho")?,
            self.f64("m_bound")?,
            self.f64("t_final")?,
        );
        Ok(if a0_ti && a_ti { f.time_independent() } else { f })
    }

    pub fn source(&self) -> Result<SourceSpec> {
        let dim = self.dim()?;
        let (p, _) = scalar_token(self.get("p")?, dim)?;
        let (r, _) = scalar_token(self.get("r")?, dim)?;
        Ok(SourceSpec {
            p,
            r,
            f: self.profile("f")?,
            m0: self.f64("m0")?,
        })
    }

    pub fn profile(&self, key: &str) -> Result<Profile> {
        let (g, _) = scalar_token(self.get(key)?, self.dim()?)?;
        Ok(Profile::function(move |x| g(x, 0.0)))
    }

    pub fn scalar(&self, key: &str) -> Result<ScalarFn> {
        Ok(scalar_token(self.get(key)?, self.dim()?)?.0)
    }

    /// Logarithmically spaced values between the `min` and `max` keys.
    pub fn log_sweep(&self, min: &str, max: &str, count: &str) -> Result<Vec<f64>> {
        let (a, b, n) = (self.f64(min)?, self.f64(max)?, self.usize(count)?);
        if !(a > 0.0 && b >= a) || n == 0 {
            return Err(LabError::Config(format!("bad sweep {min}..{max} x {n}")));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        Ok((0..n)
            .map(|j| 10f64.powf(a.log10() + (b.log10() - a.log10()) * j as f64 / (n - 1) as f64))
            .collect())
    }
}

fn numbers(token: &str, args: &[&str], min: usize, max: usize) -> Result<Vec<f64>> {
    if args.len() < min || args.len() > max {
        return Err(LabError::Config(format!(
            "'{token}' takes {min}..={max} numbers, got {}",
            args.len()
        )));
    }
    args.iter()
        .map(|a| {
            a.parse()
                .map_err(|_| LabError::Config(format!("'{token}': '{a}' is not a number")))
        })
        .collect()
}

/// Parses a scalar token; the flag says whether it ignores `t`.
pub fn scalar_token(spec: &str, dim: usize) -> Result<(ScalarFn, bool)> {
    let mut parts = spec.split_whitespace();
    let head = parts.next().unwrap_or("");
    let args: Vec<&str> = parts.collect();
    let two = dim == 2;
    let out: (ScalarFn, bool) = match head {
        "zero" => (Arc::new(|_, _| 0.0), true),
        "const" => {
            let c = numbers(head, &args, 1, 1)?[0];
            (Arc::new(move |_, _| c), true)
        }
        "affine" => {
            let c = numbers(head, &args, 2, 3)?;
            let c2 = c.get(2).cloned().unwrap_or(0.0);
            let (c0, c1) = (c[0], c[1]);
            (Arc::new(move |x: Point, _| c0 + c1 * x[0] + c2 * x[1]), true)
        }
        "exp-in-time" => {
            let c = numbers(head, &args, 2, 2)?;
            let (a, l) = (c[0], c[1]);
            (Arc::new(move |_, t: f64| a * (l * t).exp()), false)
        }
        "sin-pi" => {
            let amp = numbers(head, &args, 0, 1)?.first().cloned().unwrap_or(1.0);
            (
                Arc::new(move |x: Point, _| {
                    let v = amp * (PI * x[0]).sin();
                    if two {
                        v * (PI * x[1]).sin()
                    } else {
                        v
                    }
                }),
                true,
            )
        }
        "gauss" => {
            let c = numbers(head, &args, 3, 3)?;
            let (cx, cy, w) = (c[0], c[1], c[2]);
            (
                Arc::new(move |x: Point, _| {
                    let mut r2 = (x[0] - cx).powi(2);
                    if two {
                        r2 += (x[1] - cy).powi(2);
                    }
                    (-r2 / (w * w)).exp()
                }),
                true,
            )
        }
        "sin-shift" => {
            let c = numbers(head, &args, 2, 2)?;
            let (k, s) = (c[0], c[1]);
            (Arc::new(move |x: Point, _| (k * x[0]).sin() + s), true)
        }
        _ => return Err(LabError::Config(format!("unknown scalar token '{spec}'"))),
    };
    Ok(out)
}

type VecFn = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

/// Parses a vector token; the flag says whether it ignores `t`.
pub fn vector_token(spec: &str, dim: usize) -> Result<(VecFn, bool)> {
    let mut parts = spec.split_whitespace();
    let head = parts.next().unwrap_or("");
    let args: Vec<&str> = parts.collect();
    let out: (VecFn, bool) = match head {
        "const" => {
            let c = numbers(head, &args, dim, dim)?;
            let v = [c[0], c.get(1).cloned().unwrap_or(0.0)];
            (Arc::new(move |_, _| v), true)
        }
        "affine" if dim == 1 => {
            let c = numbers(head, &args, 2, 2)?;
            let (b, m) = (c[0], c[1]);
            (Arc::new(move |x: Point, _| [b + m * x[0], 0.0]), true)
        }
        "affine" => {
            let c = numbers(head, &args, 6, 6)?;
            (
                Arc::new(move |x: Point, _| {
                    [
                        c[0] + c[2] * x[0] + c[3] * x[1],
                        c[1] + c[4] * x[0] + c[5] * x[1],
                    ]
                }),
                true,
            )
        }
        "rotational" if dim == 2 => (Arc::new(|x: Point, _| [-x[1], x[0]]), true),
        "exp-in-time" => {
            let c = numbers(head, &args, 3, 3)?;
            let (a1, a2, l) = (c[0], c[1], c[2]);
            (Arc::new(move |_, t: f64| [a1 * (l * t).exp(), a2 * (l * t).exp()]), false)
        }
        _ => return Err(LabError::Config(format!("unknown vector token '{spec}' for dim {dim}"))),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_expected_scenarios() {
        let names: Vec<String> = list_scenarios().into_iter().map(|s| s.0).collect();
        assert_eq!(names[0], "paper-1d");
        assert!(names.contains(&"rotational-2d".to_string()));
        assert_eq!(list_scenarios(), list_scenarios());
    }

    #[test]
    fn paper_scenario_resolves() {
        let s = Scenario::load("paper-1d").unwrap();
        let f = s.field().unwrap();
        assert!(f.is_time_independent());
        assert_eq!(f.a0([0.3, 0.0], 1.0), 1.0);
        assert_eq!(f.a([0.3, 0.0], 1.0), [1.0, 0.0]);
        let g = s.grid().unwrap();
        assert_eq!((g.space.len(), g.nt, g.t_final), (201, 501, 2.5));
        assert_eq!(s.f64("beta").unwrap(), 0.5);
    }

    #[test]
    fn overrides_are_checked() {
        let mut s = Scenario::load("paper-1d").unwrap();
        s.apply_overrides(&["beta=1.0"]).unwrap();
        assert_eq!(s.f64("beta").unwrap(), 1.0);
        assert!(matches!(s.apply_overrides(&["betta=1"]), Err(LabError::BadOverride(_))));
        assert!(matches!(s.apply_overrides(&["beta"]), Err(LabError::BadOverride(_))));
        assert!(matches!(Scenario::load("nope"), Err(LabError::UnknownScenario(_))));
    }

    #[test]
    fn tokens() {
        let (g, ti) = scalar_token("affine 1 2 3", 2).unwrap();
        assert!(ti && g([1.0, 1.0], 0.0) == 6.0);
        let (g, ti) = scalar_token("exp-in-time 2 -1", 1).unwrap();
        assert!(!ti && (g([0.0, 0.0], 1.0) - 2.0 / std::f64::consts::E).abs() < 1e-15);
        let (v, _) = vector_token("rotational", 2).unwrap();
        assert_eq!(v([1.0, 2.0], 0.0), [-2.0, 1.0]);
        assert!(vector_token("rotational", 1).is_err());
        assert!(scalar_token("const", 1).is_err());
    }
}
