use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
enum Cells {
    /// Values drawn from an ordered alphabet of allowed values.
    Discrete { alphabet: Vec<i64>, cells: Vec<i64> },
    Continuous { cells: Vec<f64> },
}

/// Row-major `N_τ × d_τ` feature matrix for one node type.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    width: usize,
    rows: usize,
    cells: Cells,
}

impl FeatureMatrix {
    pub fn discrete(alphabet: Vec<i64>, width: usize, rows: Vec<Vec<i64>>) -> Result<Self> {
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::Shape(format!(
                    "row of length {} in matrix of width {width}",
                    row.len()
                )));
            }
            cells.extend(row);
        }
        let m = Self {
            width,
            rows: n,
            cells: Cells::Discrete { alphabet, cells },
        };
        m.validate().map_err(Error::InvalidArgument)?;
        Ok(m)
    }

    /// Discrete matrix whose alphabet is the sorted set of values present.
    pub fn discrete_inferred(width: usize, rows: Vec<Vec<i64>>) -> Result<Self> {
        let mut alphabet: Vec<i64> = rows.iter().flatten().copied().collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        if alphabet.is_empty() {
            alphabet.push(0);
        }
        Self::discrete(alphabet, width, rows)
    }

    pub fn continuous(width: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::Shape(format!(
                    "row of length {} in matrix of width {width}",
                    row.len()
                )));
            }
            cells.extend(row);
        }
        let m = Self {
            width,
            rows: n,
            cells: Cells::Continuous { cells },
        };
        m.validate().map_err(Error::InvalidArgument)?;
        Ok(m)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        match &self.cells {
            Cells::Discrete { alphabet, cells } => {
                if alphabet.is_empty() {
                    return Err("empty alphabet".into());
                }
                if alphabet.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("alphabet must be strictly increasing".into());
                }
                if cells.len() != self.rows * self.width {
                    return Err("cell count does not match shape".into());
                }
                if let Some(v) = cells.iter().find(|v| alphabet.binary_search(v).is_err()) {
                    return Err(format!("value {v} outside alphabet"));
                }
            }
            Cells::Continuous { cells } => {
                if cells.len() != self.rows * self.width {
                    return Err("cell count does not match shape".into());
                }
                if cells.iter().any(|v| !v.is_finite()) {
                    return Err("non-finite value".into());
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> FeatureKind {
        match self.cells {
            Cells::Discrete { .. } => FeatureKind::Discrete,
            Cells::Continuous { .. } => FeatureKind::Continuous,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn alphabet(&self) -> Option<&[i64]> {
        match &self.cells {
            Cells::Discrete { alphabet, .. } => Some(alphabet),
            Cells::Continuous { .. } => None,
        }
    }

    pub fn discrete_row(&self, i: usize) -> Option<&[i64]> {
        match &self.cells {
            Cells::Discrete { cells, .. } => Some(&cells[i * self.width..(i + 1) * self.width]),
            Cells::Continuous { .. } => None,
        }
    }

    pub fn continuous_row(&self, i: usize) -> Option<&[f64]> {
        match &self.cells {
            Cells::Continuous { cells } => Some(&cells[i * self.width..(i + 1) * self.width]),
            Cells::Discrete { .. } => None,
        }
    }

    /// Row `i` as reals regardless of kind.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        match &self.cells {
            Cells::Discrete { cells, .. } => cells[i * self.width..(i + 1) * self.width]
                .iter()
                .map(|&v| v as f64)
                .collect(),
            Cells::Continuous { cells } => cells[i * self.width..(i + 1) * self.width].to_vec(),
        }
    }

    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row_f64(i)).collect()
    }

    /// Discrete rows as alphabet indices (`0..k`).
    pub fn alphabet_indices(&self) -> Option<Vec<Vec<usize>>> {
        match &self.cells {
            Cells::Discrete { alphabet, cells } => Some(
                cells
                    .chunks(self.width.max(1))
                    .take(self.rows)
                    .map(|row| {
                        row.iter()
                            .map(|v| alphabet.binary_search(v).expect("validated"))
                            .collect()
                    })
                    .collect(),
            ),
            Cells::Continuous { .. } => None,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let w = self.width;
        let cells = match &self.cells {
            Cells::Discrete { alphabet, cells } => Cells::Discrete {
                alphabet: alphabet.clone(),
                cells: rows
                    .iter()
                    .flat_map(|&r| cells[r * w..(r + 1) * w].iter().copied())
                    .collect(),
            },
            Cells::Continuous { cells } => Cells::Continuous {
                cells: rows
                    .iter()
                    .flat_map(|&r| cells[r * w..(r + 1) * w].iter().copied())
                    .collect(),
            },
        };
        FeatureMatrix {
            width: w,
            rows: rows.len(),
            cells,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let w = self.width;
        let pick = |row: usize, c: usize| row * w + c;
        let cells = match &self.cells {
            Cells::Discrete { alphabet, cells } => Cells::Discrete {
                alphabet: alphabet.clone(),
                cells: (0..self.rows)
                    .flat_map(|r| cols.iter().map(move |&c| cells[pick(r, c)]))
                    .collect(),
            },
            Cells::Continuous { cells } => Cells::Continuous {
                cells: (0..self.rows)
                    .flat_map(|r| cols.iter().map(move |&c| cells[pick(r, c)]))
                    .collect(),
            },
        };
        FeatureMatrix {
            width: cols.len(),
            rows: self.rows,
            cells,
        }
    }

    /// Stack the rows of several matrices of the same kind and width.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("no matrices to concatenate".into()))?;
        let width = first.width;
        let mut rows = 0;
        let mut disc = Vec::new();
        let mut cont = Vec::new();
        let mut alphabet: Option<Vec<i64>> = None;
        for m in parts {
            if m.width != width || m.kind() != first.kind() {
                return Err(Error::Shape("concatenating incompatible matrices".into()));
            }
            rows += m.rows;
            match &m.cells {
                Cells::Discrete { alphabet: a, cells } => {
                    let merged = alphabet.get_or_insert_with(Vec::new);
                    merged.extend(a);
                    disc.extend(cells);
                }
                Cells::Continuous { cells } => cont.extend(cells),
            }
        }
        let cells = match alphabet {
            Some(mut a) => {
                a.sort_unstable();
                a.dedup();
                Cells::Discrete {
                    alphabet: a,
                    cells: disc,
                }
            }
            None => Cells::Continuous { cells: cont },
        };
        Ok(FeatureMatrix { width, rows, cells })
    }
}
