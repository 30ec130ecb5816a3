use crate::dlr::{next_line, parse_row, parse_tok};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Selected realisations on the structured vertex grid.
///
/// Text layout: a header `t R n_per_side N_C`, a line with the dumped sample
/// indices, then for every realisation `n_per_side + 1` rows of nodal values
/// (row `j` holds the vertices with `x₂ = j h`, ordered by `x₁`).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub t: f64,
    pub rank: usize,
    pub n_per_side: usize,
    pub n_samples: usize,
    pub indices: Vec<usize>,
    /// One vector of `(n_per_side + 1)²` nodal values per index.
    pub fields: Vec<Vec<f64>>,
}

impl FieldDump {
    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let np = self.n_per_side + 1;
        writeln!(w, "{} {} {} {}", self.t, self.rank, self.n_per_side, self.n_samples)?;
        let idx: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}", idx.join(" "))?;
        for f in &self.fields {
            if f.len() != np * np {
                return Err(Error::DimensionMismatch {
                    what: "dumped field",
                    expected: np * np,
                    found: f.len(),
                });
            }
            for row in f.chunks(np) {
                let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", vals.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = next_line(&mut lines)?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::Parse("field dump header must be `t R n_per_side N_C`".into()));
        }
        let t = parse_tok::<f64>(toks[0])?;
        let rank = parse_tok(toks[1])?;
        let n_per_side: usize = parse_tok(toks[2])?;
        let n_samples = parse_tok(toks[3])?;
        let indices = next_line(&mut lines)?
            .split_whitespace()
            .map(parse_tok::<usize>)
            .collect::<Result<Vec<_>>>()?;
        let np = n_per_side + 1;
        let mut fields = Vec::with_capacity(indices.len());
        for _ in &indices {
            let mut f = Vec::with_capacity(np * np);
            for _ in 0..np {
                f.extend(parse_row::<f64>(&next_line(&mut lines)?, np)?);
            }
            fields.push(f);
        }
        Ok(Self {
            t,
            rank,
            n_per_side,
            n_samples,
            indices,
            fields,
        })
    }
}
