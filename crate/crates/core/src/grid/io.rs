use super::{GridFunction, Grid2D};
use crate::error::{Error, Result};
use crate::xreal::XReal;
use std::fmt::Write as _;
use std::sync::Arc;

pub const CSV_HEADER: &str = "domain,kind,nx,ny,h";

/// CSV form: the `domain,kind,nx,ny,h` header, its value row, then one row per node.
pub fn field_to_csv(f: &GridFunction, kind: &str) -> String {
    let g = &f.grid;
    let mut s = String::new();
    let _ = writeln!(s, "{CSV_HEADER}");
    let _ = writeln!(s, "{},{kind},{},{},{:.17e}", g.spec.kind.name(), g.spec.nx, g.spec.ny, g.h());
    let _ = writeln!(s, "node,x,y,value");
    for (i, (n, v)) in g.nodes.iter().zip(&f.values).enumerate() {
        let _ = writeln!(s, "{i},{:.17e},{:.17e},{}", n.x, n.y, v.token());
    }
    s
}

pub fn field_from_csv(grid: Arc<Grid2D>, text: &str) -> Result<GridFunction> {
    let bad = |m: &str| Error::GridMismatch(format!("field csv: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad("missing header"));
    }
    let meta: Vec<&str> = lines.next().ok_or_else(|| bad("missing metadata"))?.split(',').collect();
    if meta.len() != 5 || meta[0] != grid.spec.kind.name() {
        return Err(bad("domain does not match grid"));
    }
    if meta[2].parse::<usize>().ok() != Some(grid.spec.nx) || meta[3].parse::<usize>().ok() != Some(grid.spec.ny) {
        return Err(bad("resolution does not match grid"));
    }
    lines.next();
    let values = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.rsplit(',').next().ok_or_else(|| bad("empty row")).and_then(XReal::parse_token))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    #[test]
    fn csv_round_trip_keeps_flags() {
        let g = build_grid(DomainSpec::disk(8, 3, 16)).unwrap();
        let mut f = GridFunction::from_fn(g.clone(), |x, y| XReal::Finite(x * y - 0.1));
        f.values[5] = XReal::NegInf;
        f.values[7] = XReal::PosInf;
        let back = field_from_csv(g, &field_to_csv(&f, "test")).unwrap();
        assert_eq!(back, f);
    }
}
