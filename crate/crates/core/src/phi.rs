//! Prescribed densities `φ`: the spec mini-grammar and CSV tables.
//!
//! ```text
//! const:<a>                 φ ≡ a
//! znpoly:<c0,c1,...>        φ = Σ c_k ζ_n^k with ζ_n = cosβ − cosθ
//! cos2k:<a0,k,a>            φ = a0 + a·cos(2kβ)   (arc domains only)
//! table:<path>              CSV `beta,value` or `beta,alpha,value`
//! ```

use std::fmt;
use std::path::Path;

use crate::domain::{DomainRef, Mode, ScalarField};
use crate::error::{CapError, Result};

/// A validated positive even density on a cap domain.
#[derive(Debug, Clone)]
pub struct PhiSpec {
    field: ScalarField,
    provenance: String,
}

impl PhiSpec {
    /// Wrap an already sampled field, checking positivity.
    pub fn from_field(field: ScalarField, provenance: impl Into<String>) -> Result<Self> {
        let (min, node) = field.min();
        if !(min > 0.0) {
            let beta = field.domain().nodes()[node].beta;
            return Err(CapError::Parameter(format!(
                "density not positive: min {min:.6e} at node {node} (beta = {beta:.6})"
            )));
        }
        let residual = field.domain().evenness_residual(&field)?;
        if residual != 0.0 {
            return Err(CapError::Evenness(residual));
        }
        Ok(PhiSpec { field, provenance: provenance.into() })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn domain(&self) -> &DomainRef {
        self.field.domain()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// `μ·φ`; the curvature image operator is invariant under this.
    pub fn scaled(&self, mu: f64) -> Result<Self> {
        PhiSpec::from_field(self.field.scaled(mu), format!("{}*{mu}", self.provenance))
    }
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.provenance)
    }
}

fn grammar(position: usize, message: impl Into<String>) -> CapError {
    CapError::Grammar { position, message: message.into() }
}

/// Parse a comma-separated list of numbers starting at byte `offset` of the spec.
fn parse_numbers(body: &str, offset: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut pos = offset;
    for item in body.split(',') {
        let trimmed = item.trim();
        let lead = item.len() - item.trim_start().len();
        let v: f64 = trimmed
            .parse()
            .map_err(|_| grammar(pos + lead, format!("expected a number, found `{trimmed}`")))?;
        if !v.is_finite() {
            return Err(grammar(pos + lead, format!("non-finite number `{trimmed}`")));
        }
        out.push(v);
        pos += item.len() + 1;
    }
    Ok(out)
}

/// Parse a density spec and sample it on `domain`.
pub fn parse_phi(spec: &str, domain: &DomainRef) -> Result<PhiSpec> {
    let colon = spec
        .find(':')
        .ok_or_else(|| grammar(0, "expected `<kind>:<arguments>`"))?;
    let kind = &spec[..colon];
    let body = &spec[colon + 1..];
    let offset = colon + 1;
    let cos_t = domain.theta().cos();

    let field = match kind {
        "const" => {
            let v = parse_numbers(body, offset)?;
            if v.len() != 1 {
                return Err(grammar(offset, format!("const takes 1 value, got {}", v.len())));
            }
            ScalarField::constant(domain, v[0])
        }
        "znpoly" => {
            let coeffs = parse_numbers(body, offset)?;
            ScalarField::from_fn(domain, |nd| {
                let z = nd.beta.cos() - cos_t;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
            })?
        }
        "cos2k" => {
            if domain.mode() != Mode::Arc {
                return Err(grammar(0, "cos2k is only available on arc domains"));
            }
            let v = parse_numbers(body, offset)?;
            if v.len() != 3 {
                return Err(grammar(offset, format!("cos2k takes 3 values, got {}", v.len())));
            }
            let (a0, k, a) = (v[0], v[1], v[2]);
            ScalarField::from_fn(domain, |nd| a0 + a * (2.0 * k * nd.beta).cos())?
        }
        "table" => {
            if body.is_empty() {
                return Err(grammar(offset, "missing table path"));
            }
            return load_table(Path::new(body), domain).map(|f| PhiSpec {
                field: f.field,
                provenance: spec.to_string(),
            });
        }
        other => return Err(grammar(0, format!("unknown kind `{other}`"))),
    };
    PhiSpec::from_field(field, spec)
}

/// Load and validate a CSV table, interpolating onto the domain nodes.
pub fn load_table(path: &Path, domain: &DomainRef) -> Result<PhiSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CapError::Io(format!("{}: {e}", path.display())))?;
    let field = match domain.mode() {
        Mode::Full2d => FullTable::parse(&text)?.to_field(domain)?,
        _ => MeridianTable::parse(&text)?.to_field(domain)?,
    };
    PhiSpec::from_field(field, format!("table:{}", path.display()))
}

fn read_rows(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| CapError::Io(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(CapError::Io(format!("expected header `{}`, found `{}`", header.join(","), found.join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CapError::Io(e.to_string()))?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| CapError::Io(format!("row {}: {e}", line + 2)))?;
        if row.len() != header.len() || row.iter().any(|v| !v.is_finite()) {
            return Err(CapError::Io(format!("row {}: malformed", line + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// `beta,value` table for arc and axisymmetric domains.
#[derive(Debug, Clone, PartialEq)]
pub struct MeridianTable {
    pub beta: Vec<f64>,
    pub value: Vec<f64>,
}

impl MeridianTable {
    pub fn parse(text: &str) -> Result<Self> {
        let rows = read_rows(text, &["beta", "value"])?;
        if rows.len() < 2 {
            return Err(CapError::Io("table needs at least two rows".into()));
        }
        let beta: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if beta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CapError::Io("beta column must be strictly increasing".into()));
        }
        Ok(MeridianTable { beta, value: rows.iter().map(|r| r[1]).collect() })
    }

    /// Piecewise-linear interpolation at `b`; the table must cover `[0, θ]`.
    pub fn eval(&self, b: f64) -> f64 {
        let k = self.beta.partition_point(|&x| x <= b).clamp(1, self.beta.len() - 1);
        let (x0, x1) = (self.beta[k - 1], self.beta[k]);
        let t = (b - x0) / (x1 - x0);
        self.value[k - 1] + t * (self.value[k] - self.value[k - 1])
    }

    pub fn to_field(&self, domain: &DomainRef) -> Result<ScalarField> {
        check_coverage(&self.beta, domain)?;
        ScalarField::from_fn(domain, |nd| self.eval(nd.beta))
    }
}

fn check_coverage(beta: &[f64], domain: &DomainRef) -> Result<()> {
    let slack = 1e-12;
    let (lo, hi) = (beta[0], beta[beta.len() - 1]);
    if lo > slack || hi < domain.theta() - slack {
        return Err(CapError::Io(format!(
            "table covers beta in [{lo}, {hi}] but the cap needs [0, {}]",
            domain.theta()
        )));
    }
    Ok(())
}

/// `beta,alpha,value` table for full2d domains. Rows at `α` and `α + π`
/// describe mirror-image points and must agree for an even density.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTable {
    pub rows: Vec<(f64, f64, f64)>,
}

impl FullTable {
    pub fn parse(text: &str) -> Result<Self> {
        let rows = read_rows(text, &["beta", "alpha", "value"])?;
        Ok(FullTable { rows: rows.into_iter().map(|r| (r[0], r[1], r[2])).collect() })
    }

    fn key(beta: f64, alpha: f64) -> (i64, i64) {
        let a = alpha.rem_euclid(2.0 * std::f64::consts::PI);
        ((beta * 1e9).round() as i64, (a * 1e9).round() as i64)
    }

    /// Max `|g(β, α) − g(β, α + π)|` over pairs present in the table.
    pub fn evenness_residual(&self) -> f64 {
        use std::collections::HashMap;
        let map: HashMap<(i64, i64), f64> =
            self.rows.iter().map(|&(b, a, v)| (Self::key(b, a), v)).collect();
        self.rows
            .iter()
            .filter_map(|&(b, a, v)| {
                map.get(&Self::key(b, a + std::f64::consts::PI)).map(|w| (v - w).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Fold onto the half-azimuth grid. Every node must appear in the table
    /// (at `α` or `α + π`); the table must be even to round-off.
    pub fn to_field(&self, domain: &DomainRef) -> Result<ScalarField> {
        use std::collections::HashMap;
        let residual = self.evenness_residual();
        if residual > 1e-12 {
            return Err(CapError::Evenness(residual));
        }
        let map: HashMap<(i64, i64), f64> =
            self.rows.iter().map(|&(b, a, v)| (Self::key(b, a), v)).collect();
        let pole: Vec<f64> = self.rows.iter().filter(|r| r.0 == 0.0).map(|r| r.2).collect();
        let mut values = Vec::with_capacity(domain.len());
        for nd in domain.nodes() {
            let v = if nd.beta == 0.0 {
                pole.first().copied()
            } else {
                map.get(&Self::key(nd.beta, nd.alpha))
                    .or_else(|| map.get(&Self::key(nd.beta, nd.alpha + std::f64::consts::PI)))
                    .copied()
            };
            values.push(v.ok_or_else(|| {
                CapError::Io(format!("table has no entry for beta = {}, alpha = {}", nd.beta, nd.alpha))
            })?);
        }
        ScalarField::new(domain.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, make_full2d_domain};
    use std::f64::consts::FRAC_PI_3;
    use std::io::Write;

    fn arc() -> DomainRef {
        make_domain(2, FRAC_PI_3, 65, Mode::Arc).unwrap()
    }

    #[test]
    fn constant_spec() {
        let phi = parse_phi("const:1", &arc()).unwrap();
        assert!(phi.field().values().iter().all(|&v| v == 1.0));
        assert_eq!(phi.provenance(), "const:1");
    }

    #[test]
    fn cos2k_minimum_on_cap() {
        let phi = parse_phi("cos2k:1,1,0.3", &arc()).unwrap();
        let (min, node) = phi.field().min();
        assert!((min - 0.85).abs() < 1e-12);
        assert_eq!(node, 64);
    }

    #[test]
    fn znpoly_positivity_error() {
        let err = parse_phi("znpoly:1,0,-5", &arc()).unwrap_err();
        match err {
            CapError::Parameter(msg) => assert!(msg.contains("node 0"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let phi = parse_phi("znpoly:1,0.5", &arc()).unwrap();
        assert!((phi.field().values()[0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn grammar_errors_carry_position() {
        let d = arc();
        assert_eq!(parse_phi("const1", &d).unwrap_err(), grammar(0, "expected `<kind>:<arguments>`"));
        match parse_phi("znpoly:1,x", &d).unwrap_err() {
            CapError::Grammar { position, .. } => assert_eq!(position, 9),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_phi("blob:1", &d), Err(CapError::Grammar { position: 0, .. })));
        assert!(matches!(parse_phi("cos2k:1,1", &d), Err(CapError::Grammar { .. })));
        let axi = make_domain(3, FRAC_PI_3, 33, Mode::Axisymmetric).unwrap();
        assert!(matches!(parse_phi("cos2k:1,1,0.3", &axi), Err(CapError::Grammar { .. })));
    }

    #[test]
    fn meridian_table_roundtrip() {
        let d = arc();
        let mut file = tempfile_in_target("phi_table.csv");
        writeln!(file.1, "beta,value").unwrap();
        for k in 0..=200 {
            let b = FRAC_PI_3 * k as f64 / 200.0;
            writeln!(file.1, "{b},{}", 2.0 + b).unwrap();
        }
        drop(file.1);
        let phi = parse_phi(&format!("table:{}", file.0.display()), &d).unwrap();
        for (v, nd) in phi.field().values().iter().zip(d.nodes()) {
            assert!((v - (2.0 + nd.beta)).abs() < 1e-12);
        }
        let _ = std::fs::remove_file(&file.0);
    }

    #[test]
    fn meridian_table_rejects_bad_input() {
        assert!(MeridianTable::parse("beta,value\n0,1\n0,2\n").is_err());
        assert!(MeridianTable::parse("b,v\n0,1\n1,2\n").is_err());
        let t = MeridianTable::parse("beta,value\n0,1\n0.5,2\n").unwrap();
        assert!(t.to_field(&arc()).is_err());
        let neg = MeridianTable::parse("beta,value\n0,1\n2,-1\n").unwrap();
        let f = neg.to_field(&arc()).unwrap();
        assert!(PhiSpec::from_field(f, "t").is_err());
    }

    #[test]
    fn full_table_evenness() {
        let d = make_full2d_domain(0.7, 17, 8).unwrap();
        let mut text = String::from("beta,alpha,value\n0,0,1\n");
        for &b in &d.betas()[1..] {
            for j in 0..16 {
                let a = std::f64::consts::PI * j as f64 / 8.0;
                text.push_str(&format!("{b},{a},{}\n", 1.0 + b * (2.0 * a).cos().powi(2)));
            }
        }
        let table = FullTable::parse(&text).unwrap();
        assert!(table.evenness_residual() < 1e-12);
        let field = table.to_field(&d).unwrap();
        assert_eq!(d.evenness_residual(&field).unwrap(), 0.0);

        let mut perturbed = table.clone();
        perturbed.rows[5].2 += 0.25;
        assert!((perturbed.evenness_residual() - 0.25).abs() < 1e-12);
        assert!(matches!(perturbed.to_field(&d), Err(CapError::Evenness(_))));
    }

    fn tempfile_in_target(name: &str) -> (std::path::PathBuf, std::fs::File) {
        let dir = std::env::temp_dir().join(format!("capillary-phi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let f = std::fs::File::create(&path).unwrap();
        (path, f)
    }
}
