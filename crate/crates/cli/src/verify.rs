//! Facial-distance verification table.

use std::fmt;

use polyfw::games::{build_kuhn, to_sequence_form};
use polyfw::polytope::{
    closed_form_simplex_facial_distance, fd_bruteforce, fd_lower_bound_equality_form,
    fd_lower_bound_integral_form, polytope_facial_distance, FacialDistanceOptions, PolytopeError,
};

/// Agreement required between the brute-force value and the closed form.
pub const CLOSED_FORM_TOL: f64 = 1e-6;
pub const MAX_SIMPLEX: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FdRow {
    pub name: String,
    pub brute: f64,
    pub closed_form: Option<f64>,
    pub bound: f64,
    pub bound_kind: &'static str,
}

impl FdRow {
    pub fn closed_form_ok(&self) -> bool {
        self.closed_form
            .is_none_or(|c| (c - self.brute).abs() <= CLOSED_FORM_TOL)
    }

    pub fn bound_ok(&self) -> bool {
        self.brute >= self.bound
    }

    pub fn ok(&self) -> bool {
        self.closed_form_ok() && self.bound_ok()
    }
}

fn simplex_row(n: usize) -> Result<FdRow, PolytopeError> {
    let t = polyfw::polytope::Treeplex::simplex(n)?;
    Ok(FdRow {
        name: format!("simplex n={n}"),
        brute: fd_bruteforce(&t)?,
        closed_form: Some(closed_form_simplex_facial_distance(n)),
        bound: fd_lower_bound_equality_form(1.0, n, None)?,
        bound_kind: "1/sqrt(n)",
    })
}

fn kuhn_rows() -> Result<Vec<FdRow>, PolytopeError> {
    let game = build_kuhn(2, 3)
        .and_then(|t| to_sequence_form(&t))
        .map_err(|e| PolytopeError::InvalidArgument(e.to_string()))?;
    (0..2)
        .map(|p| {
            let t = game.treeplex(p);
            let n = t.num_sequences();
            Ok(FdRow {
                name: format!("kuhn2 player {} (n={n})", p + 1),
                brute: fd_bruteforce(t)?,
                closed_form: None,
                bound: fd_lower_bound_equality_form(1.0, n, None)?,
                bound_kind: "1/sqrt(n)",
            })
        })
        .collect()
}

/// The unit cube in standard form `{(x, s) : x + s = 1, x, s >= 0}` in six coordinates.
fn cube_row() -> Result<FdRow, PolytopeError> {
    let d = 3;
    let vertices: Vec<Vec<f64>> = (0..1u32 << d)
        .map(|mask| {
            let x: Vec<f64> = (0..d).map(|i| f64::from((mask >> i) & 1)).collect();
            x.iter().copied().chain(x.iter().map(|v| 1.0 - v)).collect()
        })
        .collect();
    let inequalities: Vec<(Vec<f64>, f64)> = (0..2 * d)
        .map(|i| {
            let mut row = vec![0.0; 2 * d];
            row[i] = -1.0;
            (row, 0.0)
        })
        .collect();
    let c: Vec<Vec<u64>> = (0..d)
        .map(|i| (0..2 * d).map(|j| u64::from(j % d == i)).collect())
        .collect();
    Ok(FdRow {
        name: "cube d=3 (standard form, n=6)".into(),
        brute: polytope_facial_distance(
            &vertices,
            &inequalities,
            &FacialDistanceOptions::default(),
        )?,
        closed_form: Some((2.0f64 / 3.0).sqrt()),
        bound: fd_lower_bound_integral_form(&c, 2 * d)?,
        bound_kind: "1/(|C| sqrt(n))",
    })
}

/// Rows for simplices `2..=max_n` followed by the fixture polytopes.
pub fn verify_facial_distance(max_n: usize) -> Result<Vec<FdRow>, PolytopeError> {
    if !(2..=MAX_SIMPLEX).contains(&max_n) {
        return Err(PolytopeError::InvalidArgument(format!(
            "max-n must lie in 2..={MAX_SIMPLEX}, got {max_n}"
        )));
    }
    let mut rows = (2..=max_n)
        .map(simplex_row)
        .collect::<Result<Vec<_>, _>>()?;
    rows.extend(kuhn_rows()?);
    rows.push(cube_row()?);
    Ok(rows)
}

pub struct Table<'a>(pub &'a [FdRow]);

impl fmt::Display for Table<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<30} {:>12} {:>12} {:>12}  {:<16} status",
            "polytope", "brute", "closed", "bound", "bound form"
        )?;
        for r in self.0 {
            let closed = r.closed_form.map_or("-".to_string(), |c| format!("{c:.8}"));
            let status = if r.ok() { "ok" } else { "VIOLATION" };
            writeln!(
                f,
                "{:<30} {:>12.8} {:>12} {:>12.8}  {:<16} {}",
                r.name, r.brute, closed, r.bound, r.bound_kind, status
            )?;
        }
        Ok(())
    }
}
