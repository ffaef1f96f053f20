//! Frame CSV format.
//!
//! One header row `t,x,<component names>` followed by one row per cell per
//! frame. Numbers use the C `%.17g` convention, so every value read back is
//! bit-identical to the value written.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::solver::{FieldState, Frame, Grid1D, SolverError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("CSV holds no data rows")]
    Empty,
    #[error(transparent)]
    Grid(#[from] SolverError),
}

/// `%.17g` formatting.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_frames<W: Write>(
    out: &mut W,
    grid: &Grid1D,
    frames: &[Frame],
    names: &[String],
) -> std::io::Result<()> {
    write!(out, "t,x")?;
    for n in names {
        write!(out, ",{n}")?;
    }
    writeln!(out)?;
    let x = grid.centers();
    for frame in frames {
        for (i, xi) in x.iter().enumerate() {
            write!(out, "{},{}", fmt_g17(frame.t), fmt_g17(*xi))?;
            for c in &frame.state.components {
                write!(out, ",{}", fmt_g17(c[i]))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Default component names `u1, ..., un`.
pub fn component_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvFrames {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    pub frames: Vec<Frame>,
}

impl CsvFrames {
    /// Periodic grid implied by uniformly spaced cell centres.
    pub fn grid(&self) -> Result<Grid1D, SolverError> {
        let cells = self.x.len();
        let dx = if cells >= 2 {
            self.x[1] - self.x[0]
        } else {
            0.0
        };
        Grid1D::new(cells, dx * cells as f64)
    }
}

pub fn read_frames<R: BufRead>(input: R) -> Result<CsvFrames, IoError> {
    let mut lines = input.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(IoError::Empty),
            Some((_, l)) => {
                let l = l?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
        }
    };
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "x" {
        return Err(IoError::Parse {
            line: 1,
            message: format!("expected header `t,x,<components>`, got `{header}`"),
        });
    }
    let names = cols[2..].to_vec();
    let mut x: Vec<f64> = Vec::new();
    let mut frames: Vec<Frame> = Vec::new();
    let mut x_done = false;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| IoError::Parse {
            line: line_no,
            message,
        };
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("`{}` is not a number: {e}", s.trim())))
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != cols.len() {
            return Err(err(format!(
                "expected {} fields, got {}",
                cols.len(),
                vals.len()
            )));
        }
        let t = vals[0];
        let new_frame = frames.last().map_or(true, |f| f.t != t);
        if new_frame {
            if let Some(f) = frames.last() {
                if t < f.t {
                    return Err(err(format!("time {t} goes backwards")));
                }
                x_done = true;
                if f.state.cells() != x.len() {
                    return Err(err("frame has the wrong number of cells".into()));
                }
            }
            frames.push(Frame {
                t,
                state: FieldState {
                    components: vec![Vec::new(); names.len()],
                },
            });
        }
        let frame = frames.last_mut().expect("a frame was just pushed");
        let cell = frame.state.cells();
        if x_done {
            if cell >= x.len() || x[cell] != vals[1] {
                return Err(err(format!(
                    "x = {} does not match the first frame",
                    vals[1]
                )));
            }
        } else {
            x.push(vals[1]);
        }
        for (c, v) in frame.state.components.iter_mut().zip(&vals[2..]) {
            c.push(*v);
        }
    }
    match frames.last() {
        None => Err(IoError::Empty),
        Some(f) if f.state.cells() != x.len() => Err(IoError::Parse {
            line: 0,
            message: "last frame is incomplete".into(),
        }),
        Some(_) => Ok(CsvFrames { names, x, frames }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_matches_c() {
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (1e-5, "1.0000000000000001e-05"),
            (1e20, "1e+20"),
            (123456789.0, "123456789"),
            (1.0 / 3.0, "0.33333333333333331"),
            (0.0001, "0.0001"),
            (1e16, "10000000000000000"),
            (1e17, "1e+17"),
            (f64::NAN, "nan"),
            (f64::NEG_INFINITY, "-inf"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g17(x), want, "{x:e}");
        }
    }

    proptest! {
        #[test]
        fn g17_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: f64 = fmt_g17(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn frames_round_trip_bit_exactly() {
        let grid = Grid1D::new(16, 2.0).unwrap();
        let frames: Vec<Frame> = (0..3)
            .map(|k| Frame {
                t: k as f64 * 0.1,
                state: FieldState {
                    components: vec![
                        grid.sample(|x| (x * 1.7 + k as f64).sin() / 3.0),
                        grid.sample(|x| x.exp() * 1e-9),
                    ],
                },
            })
            .collect();
        let names = component_names("u", 2);
        let mut buf = Vec::new();
        write_frames(&mut buf, &grid, &frames, &names).unwrap();
        let back = read_frames(buf.as_slice()).unwrap();
        assert_eq!(back.names, names);
        assert_eq!(back.frames, frames);
        assert_eq!(back.x, grid.centers());
        assert_eq!(back.grid().unwrap().cells, 16);
        assert!((back.grid().unwrap().length - 2.0).abs() < 1e-14);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "t,x,u1\n0,0.5,1\n0,1.5,abc\n";
        match read_frames(text.as_bytes()) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "t,x,u1\n0,0.5,1,2\n";
        assert!(matches!(
            read_frames(text.as_bytes()),
            Err(IoError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_frames("x,t\n".as_bytes()),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(matches!(read_frames("".as_bytes()), Err(IoError::Empty)));
        let text = "t,x,u1\n0,0.5,1\n0,1.5,1\n1,0.5,2\n";
        assert!(matches!(
            read_frames(text.as_bytes()),
            Err(IoError::Parse { .. })
        ));
    }
}
