//! Butcher tableaus: storage, the built-in method families, and the JSON
//! tableau document format.
//!
//! Built-in coefficients are kept as decimal (or exact fraction) strings
//! and parsed once into `f64`. Gauss and Radau IIA entries are the
//! collocation coefficients on the roots of the shifted Legendre and Radau
//! polynomials, written out to 36 significant digits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-15;
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A Runge-Kutta method given by its coefficients `(A, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    name: String,
    stages: usize,
    /// Row-major `stages x stages`.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    explicit: bool,
}

impl ButcherTableau {
    /// Builds and validates a tableau. When `c` is `None` it is set to the
    /// row sums of `a`.
    pub fn new(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Option<Vec<f64>>,
    ) -> Result<Self> {
        let name = name.into();
        let s = b.len();
        if s == 0 {
            return Err(Error::InvalidTableau("tableau needs at least one stage".into()));
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidTableau(format!(
                "A must be {s}x{s} to match b of length {s}"
            )));
        }
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        if flat.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidTableau("coefficients must be finite".into()));
        }
        let row_sums: Vec<f64> = flat.chunks(s).map(|row| row.iter().sum()).collect();
        let c = match c {
            None => row_sums,
            Some(c) => {
                if c.len() != s {
                    return Err(Error::InvalidTableau(format!(
                        "c has length {} but the tableau has {s} stages",
                        c.len()
                    )));
                }
                for (i, (ci, rs)) in c.iter().zip(&row_sums).enumerate() {
                    let scale: f64 = flat[i * s..(i + 1) * s].iter().map(|x| x.abs()).sum();
                    if (ci - rs).abs() > ROW_SUM_TOL * scale.max(1.0) {
                        return Err(Error::InvalidTableau(format!(
                            "c[{i}] = {ci} differs from the row sum {rs} of A"
                        )));
                    }
                }
                c
            }
        };
        let weight_sum: f64 = b.iter().sum();
        if (weight_sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidTableau(format!(
                "weights sum to {weight_sum}, expected 1"
            )));
        }
        let explicit = (0..s).all(|i| (i..s).all(|j| flat[i * s + j] == 0.0));
        Ok(Self {
            name,
            stages: s,
            a: flat,
            b,
            c,
            explicit,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    /// Row `i` of `A`.
    pub fn a_row(&self, i: usize) -> &[f64] {
        &self.a[i * self.stages..(i + 1) * self.stages]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// `A` is strictly lower triangular.
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }

    pub fn to_document(&self) -> TableauDocument {
        let s = self.stages;
        TableauDocument {
            name: self.name.clone(),
            s,
            a: (0..s)
                .map(|i| self.a_row(i).iter().map(|x| x.to_string()).collect())
                .collect(),
            b: self.b.iter().map(|x| x.to_string()).collect(),
            c: Some(self.c.iter().map(|x| x.to_string()).collect()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

impl fmt::Display for ButcherTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} (s={}, {})", self.name, self.stages, if self.explicit { "explicit" } else { "implicit" })?;
        for i in 0..self.stages {
            write!(f, "{:>22.15e} |", self.c[i])?;
            for x in self.a_row(i) {
                write!(f, " {x:>22.15e}")?;
            }
            writeln!(f)?;
        }
        write!(f, "{:>22} |", "")?;
        for x in &self.b {
            write!(f, " {x:>22.15e}")?;
        }
        Ok(())
    }
}

/// On-disk tableau description. Coefficients are decimal strings; exact
/// fractions such as `"-7200/2197"` are accepted as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableauDocument {
    pub name: String,
    pub s: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    pub b: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<String>>,
}

impl TableauDocument {
    pub fn into_tableau(self) -> Result<ButcherTableau> {
        let s = self.s;
        if s == 0 {
            return Err(Error::InvalidTableau("s must be positive".into()));
        }
        if self.a.len() != s || self.a.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidTableau(format!("A must be {s}x{s}")));
        }
        if self.b.len() != s {
            return Err(Error::InvalidTableau(format!(
                "b has length {} but s = {s}",
                self.b.len()
            )));
        }
        let parse_all = |v: &[String]| v.iter().map(|x| parse_coefficient(x)).collect::<Result<Vec<_>>>();
        let a = self
            .a
            .iter()
            .map(|row| parse_all(row))
            .collect::<Result<Vec<_>>>()?;
        let b = parse_all(&self.b)?;
        let c = self.c.as_deref().map(parse_all).transpose()?;
        ButcherTableau::new(self.name, a, b, c)
    }
}

/// Parses a tableau from its JSON document.
pub fn load_tableau(document: &str) -> Result<ButcherTableau> {
    let doc: TableauDocument = serde_json::from_str(document)?;
    doc.into_tableau()
}

/// Parses a decimal literal or a fraction `p/q` into the nearest `f64`.
pub fn parse_coefficient(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::InvalidCoefficient(text.to_string());
    let value = match t.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            num / den
        }
        None => t.parse().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

struct Builtin {
    name: &'static str,
    a: &'static [&'static [&'static str]],
    b: &'static [&'static str],
}

const EULER: Builtin = Builtin {
    name: "euler",
    a: &[&["0"]],
    b: &["1"],
};

const HEUN: Builtin = Builtin {
    name: "heun",
    a: &[&["0", "0"], &["1", "0"]],
    b: &["1/2", "1/2"],
};

// Kutta's third-order method.
const ERK3: Builtin = Builtin {
    name: "erk3",
    a: &[&["0", "0", "0"], &["1/2", "0", "0"], &["-1", "2", "0"]],
    b: &["1/6", "2/3", "1/6"],
};

const ERK4_CLASSIC: Builtin = Builtin {
    name: "erk4_classic",
    a: &[
        &["0", "0", "0", "0"],
        &["1/2", "0", "0", "0"],
        &["0", "1/2", "0", "0"],
        &["0", "0", "1", "0"],
    ],
    b: &["1/6", "1/3", "1/3", "1/6"],
};

// Fehlberg 4(5), propagating the fifth-order solution.
const ERK5_FEHLBERG: Builtin = Builtin {
    name: "erk5_fehlberg",
    a: &[
        &["0", "0", "0", "0", "0", "0"],
        &["1/4", "0", "0", "0", "0", "0"],
        &["3/32", "9/32", "0", "0", "0", "0"],
        &["1932/2197", "-7200/2197", "7296/2197", "0", "0", "0"],
        &["439/216", "-8", "3680/513", "-845/4104", "0", "0"],
        &["-8/27", "2", "-3544/2565", "1859/4104", "-11/40", "0"],
    ],
    b: &["16/135", "0", "6656/12825", "28561/56430", "-9/50", "2/55"],
};

const GAUSS1: Builtin = Builtin {
    name: "gauss1",
    a: &[&["0.5"]],
    b: &["1"],
};

const GAUSS2: Builtin = Builtin {
    name: "gauss2",
    a: &[
        &["0.25", "-0.0386751345948128822545743902509787278"],
        &["0.538675134594812882254574390250978728", "0.25"],
    ],
    b: &["0.5", "0.5"],
};

const GAUSS3: Builtin = Builtin {
    name: "gauss3",
    a: &[
        &[
            "0.138888888888888888888888888888888889",
            "-0.0359766675249389034563954710966044185",
            "0.00978944401530832604958004222947556853",
        ],
        &[
            "0.300263194980864592438024947213155539",
            "0.222222222222222222222222222222222222",
            "-0.0224854172030868146602471694353777616",
        ],
        &[
            "0.267988333762469451728197735548302209",
            "0.480421111969383347900839915541048863",
            "0.138888888888888888888888888888888889",
        ],
    ],
    b: &[
        "0.277777777777777777777777777777777778",
        "0.444444444444444444444444444444444444",
        "0.277777777777777777777777777777777778",
    ],
};

const RADAU_IIA1: Builtin = Builtin {
    name: "radau_iia1",
    a: &[&["1"]],
    b: &["1"],
};

const RADAU_IIA2: Builtin = Builtin {
    name: "radau_iia2",
    a: &[
        &["0.416666666666666666666666666666666667", "-0.0833333333333333333333333333333333333"],
        &["0.75", "0.25"],
    ],
    b: &["0.75", "0.25"],
};

const RADAU_IIA3: Builtin = Builtin {
    name: "radau_iia3",
    a: &[
        &[
            "0.196815477223660425868386142991829890",
            "-0.0655354258501983881085227825696086918",
            "0.0237709743482201524204082321071896630",
        ],
        &[
            "0.394424314739087276997411671458497581",
            "0.292073411665228463020502745897058999",
            "-0.0415487521259979301981860098849674408",
        ],
        &[
            "0.376403062700467275050075442369280795",
            "0.512485826188421613838813446519608094",
            "0.111111111111111111111111111111111111",
        ],
    ],
    b: &[
        "0.376403062700467275050075442369280795",
        "0.512485826188421613838813446519608094",
        "0.111111111111111111111111111111111111",
    ],
};

const BUILTINS: &[Builtin] = &[
    EULER,
    HEUN,
    ERK3,
    ERK4_CLASSIC,
    ERK5_FEHLBERG,
    GAUSS1,
    GAUSS2,
    GAUSS3,
    RADAU_IIA1,
    RADAU_IIA2,
    RADAU_IIA3,
];

/// Names accepted by [`builtin`], in a stable order.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|b| b.name).collect()
}

/// Looks up one of the built-in methods by name.
pub fn builtin(name: &str) -> Result<ButcherTableau> {
    let entry = BUILTINS
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::UnknownMethod {
            name: name.to_string(),
            available: builtin_names().join(", "),
        })?;
    let a = entry
        .a
        .iter()
        .map(|row| row.iter().map(|x| parse_coefficient(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let b = entry
        .b
        .iter()
        .map(|x| parse_coefficient(x))
        .collect::<Result<Vec<_>>>()?;
    ButcherTableau::new(entry.name, a, b, None)
}

/// Every built-in tableau, in [`builtin_names`] order.
pub fn all_builtins() -> Vec<ButcherTableau> {
    BUILTINS
        .iter()
        .map(|b| builtin(b.name).expect("built-in tableaus are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss1_is_implicit_midpoint() {
        let t = builtin("gauss1").unwrap();
        assert_eq!(t.stages(), 1);
        assert_eq!(t.a(0, 0), 0.5);
        assert_eq!(t.b(), &[1.0]);
        assert_eq!(t.c(), &[0.5]);
        assert!(!t.is_explicit());
    }

    #[test]
    fn classic_rk4_weights_and_nodes() {
        let t = builtin("erk4_classic").unwrap();
        assert_eq!(t.b(), &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
        assert_eq!(t.c(), &[0.0, 0.5, 0.5, 1.0]);
        assert!(t.is_explicit());
    }

    #[test]
    fn euler_is_explicit_single_stage() {
        let t = builtin("euler").unwrap();
        assert_eq!(t.stages(), 1);
        assert_eq!(t.a(0, 0), 0.0);
        assert_eq!(t.b(), &[1.0]);
        assert!(t.is_explicit());
    }

    #[test]
    fn unknown_name_lists_available_methods() {
        let err = builtin("rk45").unwrap_err().to_string();
        assert!(err.contains("rk45"));
        for name in builtin_names() {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn builtin_families_have_expected_structure() {
        for t in all_builtins() {
            let implicit_family = t.name().starts_with("gauss") || t.name().starts_with("radau");
            assert_eq!(t.is_explicit(), !implicit_family, "{}", t.name());
            let sum: f64 = t.b().iter().sum();
            assert!((sum - 1.0).abs() < 1e-15, "{}", t.name());
            for i in 0..t.stages() {
                let rs: f64 = t.a_row(i).iter().sum();
                assert!((rs - t.c()[i]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn gauss2_matches_closed_form() {
        let t = builtin("gauss2").unwrap();
        let r3 = 3f64.sqrt();
        assert!((t.a(0, 1) - (0.25 - r3 / 6.0)).abs() < 1e-16);
        assert!((t.a(1, 0) - (0.25 + r3 / 6.0)).abs() < 1e-16);
        assert!((t.c()[0] - (0.5 - r3 / 6.0)).abs() < 1e-16);
    }

    #[test]
    fn radau_iia3_nodes_and_stiff_accuracy() {
        let t = builtin("radau_iia3").unwrap();
        let r6 = 6f64.sqrt();
        assert!((t.c()[0] - (4.0 - r6) / 10.0).abs() < 1e-16);
        assert!((t.c()[1] - (4.0 + r6) / 10.0).abs() < 1e-16);
        assert!((t.c()[2] - 1.0).abs() < 1e-16);
        assert_eq!(t.a_row(2), t.b());
    }

    #[test]
    fn load_euler_document() {
        let t = load_tableau(r#"{"name":"mine","s":1,"A":[["0"]],"b":["1"]}"#).unwrap();
        assert_eq!(t.a(0, 0), 0.0);
        assert_eq!(t.c(), &[0.0]);
        assert!(t.is_explicit());
    }

    #[test]
    fn load_rejects_inconsistent_weights() {
        let err = load_tableau(r#"{"name":"bad","s":2,"A":[["0","0"],["1","0"]],"b":["0.5","0.6"]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidTableau(_)), "{err}");
    }

    #[test]
    fn load_heun_defaults_nodes_to_row_sums() {
        let t = load_tableau(r#"{"name":"heun","s":2,"A":[["0","0"],["1","0"]],"b":["0.5","0.5"]}"#)
            .unwrap();
        assert!(t.is_explicit());
        assert_eq!(t.c(), &[0.0, 1.0]);
    }

    #[test]
    fn load_rejects_dimension_mismatch() {
        let err = load_tableau(r#"{"name":"bad","s":2,"A":[["0"]],"b":["1","0"]}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidTableau(_)));
        let err = load_tableau(r#"{"name":"bad","s":1,"A":[["0"]],"b":["1","0"]}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidTableau(_)));
    }

    #[test]
    fn load_rejects_inconsistent_nodes() {
        let err = load_tableau(r#"{"name":"bad","s":1,"A":[["0"]],"b":["1"],"c":["0.5"]}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidTableau(_)));
    }

    #[test]
    fn bad_coefficient_text() {
        assert!(parse_coefficient("abc").is_err());
        assert!(parse_coefficient("1/0").is_err());
        assert_eq!(parse_coefficient(" -9/50 ").unwrap(), -0.18);
    }

    #[test]
    fn serialized_builtins_reload_exactly() {
        for t in all_builtins() {
            let back = load_tableau(&t.to_json().unwrap()).unwrap();
            assert_eq!(back, t);
        }
    }
}
