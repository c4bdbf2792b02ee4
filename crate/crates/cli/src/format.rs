//! CSV output and flag value parsing.

use std::fmt::Write;

/// Formats a number with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A CSV document with one header line.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    columns: Vec<&'static str>,
    body: String,
}

impl Csv {
    pub fn new(columns: &[&'static str]) -> Csv {
        Csv {
            columns: columns.to_vec(),
            body: String::new(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        assert_eq!(fields.len(), self.columns.len(), "row width matches the header");
        let line: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        writeln!(self.body, "{}", line.join(",")).expect("writing to a String");
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.columns.join(","), self.body)
    }
}

/// Parses `lo:hi:n` into `n` equally spaced points (`n = 1` gives `lo`).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("grid '{text}' must have the form lo:hi:n"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| format!("grid '{text}': bad lower end"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("grid '{text}': bad upper end"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("grid '{text}': bad point count"))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("grid '{text}' needs finite ends and n >= 1"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:5:1").unwrap(), vec![2.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["1", "2"]);
        assert_eq!(c.render(), "a,b\n1,2\n");
    }
}
