use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use super::{Grid, GridFunction};
use crate::error::{Error, Result};

/// Writes one line per masked cell: the cell index, the center coordinates and
/// the component values, comma separated, after a header line.
pub fn write_grid_function_csv<W: Write>(f: &GridFunction, mut out: W) -> Result<()> {
    let n = f.grid().dim();
    let mut header = vec!["cell".to_string()];
    header.extend((0..n).map(|k| format!("x{k}")));
    header.extend((0..f.components()).map(|k| format!("v{k}")));
    writeln!(out, "{}", header.join(","))?;
    let mut c = vec![0.0; n];
    for idx in f.masked_cells() {
        f.grid().center(idx, &mut c);
        let mut line = idx.to_string();
        for x in c.iter().chain(f.value(idx)) {
            line.push(',');
            line.push_str(&format!("{x:e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a CSV written by [`write_grid_function_csv`] onto `grid` and `mask`.
/// Rows for unmasked cells are rejected.
pub fn read_grid_function_csv<R: BufRead>(grid: Arc<Grid>, mask: Arc<Vec<bool>>, input: R) -> Result<GridFunction> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::DomainFile("empty CSV".into()))??;
    let columns = header.split(',').count();
    let n = grid.dim();
    if columns < n + 2 {
        return Err(Error::DomainFile(format!("CSV header has {columns} columns, need at least {}", n + 2)));
    }
    let components = columns - 1 - n;
    let mut f = GridFunction::zeros(grid.clone(), mask.clone(), components)?;
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(Error::DomainFile(format!("CSV row {} has {} columns", row + 2, fields.len())));
        }
        let bad = |s: &str| Error::DomainFile(format!("CSV row {}: cannot parse '{s}'", row + 2));
        let idx: usize = fields[0].trim().parse().map_err(|_| bad(fields[0]))?;
        if idx >= grid.len() || !mask[idx] {
            return Err(Error::DomainFile(format!("CSV row {}: cell {idx} is outside the domain", row + 2)));
        }
        for (k, s) in fields[1 + n..].iter().enumerate() {
            f.value_mut(idx)[k] = s.trim().parse().map_err(|_| bad(s))?;
        }
    }
    Ok(f)
}

const MAGIC: &[u8; 8] = b"DIVTGF01";

/// Little-endian binary dump: magic, dimension, components, shape, origin, h,
/// then all values in cell-major order.
pub fn write_grid_function_binary<W: Write>(f: &GridFunction, mut out: W) -> Result<()> {
    let grid = f.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(grid.dim() as u64).to_le_bytes())?;
    out.write_all(&(f.components() as u64).to_le_bytes())?;
    for &s in grid.shape() {
        out.write_all(&(s as u64).to_le_bytes())?;
    }
    for &o in grid.origin() {
        out.write_all(&o.to_le_bytes())?;
    }
    out.write_all(&grid.h().to_le_bytes())?;
    for v in f.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a binary dump; all cells are treated as masked.
pub fn read_grid_function_binary<R: Read>(mut input: R) -> Result<GridFunction> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::DomainFile("not a grid function dump".into()));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let dim = next_u64(&mut input)? as usize;
    let components = next_u64(&mut input)? as usize;
    let shape = (0..dim).map(|_| next_u64(&mut input).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let origin = (0..dim).map(|_| next_u64(&mut input).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
    let h = f64::from_bits(next_u64(&mut input)?);
    let grid = Arc::new(Grid::new(origin, h, shape)?);
    let values = (0..grid.len() * components).map(|_| next_u64(&mut input).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
    let mask = Arc::new(vec![true; grid.len()]);
    GridFunction::from_values(grid, mask, components, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AaBox;

    fn sample() -> GridFunction {
        let grid = Arc::new(Grid::covering(&AaBox::new(vec![0.0, 0.0], vec![1.0, 0.5]), 0.125).unwrap());
        let mask = Arc::new(vec![true; grid.len()]);
        GridFunction::from_fn(grid, mask, |x| x[0] * 0.1 - x[1] / 3.0).unwrap()
    }

    #[test]
    fn csv_roundtrip() {
        let f = sample();
        let mut buf = Vec::new();
        write_grid_function_csv(&f, &mut buf).unwrap();
        let g = read_grid_function_csv(f.grid().clone(), f.mask().clone(), buf.as_slice()).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn binary_roundtrip() {
        let f = sample();
        let mut buf = Vec::new();
        write_grid_function_binary(&f, &mut buf).unwrap();
        let g = read_grid_function_binary(buf.as_slice()).unwrap();
        assert_eq!(f.values(), g.values());
        assert_eq!(**f.grid(), **g.grid());
    }
}
