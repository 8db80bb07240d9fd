//! Text formats: event logs, raw trajectories, query files and result lines.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use num_traits::Float;

use crate::engine::StpQuery;
use crate::error::{Error, Result};
use crate::grid::Sample;
use crate::types::{CellEvent, CellId, EventKind, ObjectId, RoutedEvent, TemporalConstraint, Timestamp};

pub const EVENT_HEADER: &str = "t,object_id,cell_col,cell_row,kind";
pub const TRAJECTORY_HEADER: &str = "t,object_id,x,y";

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn field<T: std::str::FromStr>(line: usize, name: &str, v: Option<&str>) -> Result<T> {
    let v = v.ok_or_else(|| perr(line, format!("missing field {name}")))?;
    v.trim().parse().map_err(|_| perr(line, format!("bad {name} '{v}'")))
}

pub fn write_events(mut w: impl Write, events: &[RoutedEvent]) -> Result<()> {
    writeln!(w, "{EVENT_HEADER}")?;
    for e in events {
        let ev = e.event;
        writeln!(w, "{},{},{},{},{}", ev.t, ev.object.0, e.cell.col, e.cell.row, ev.kind.code())?;
    }
    Ok(())
}

/// Events in file order; line numbers in errors are 1-based file lines.
pub fn read_events(r: impl BufRead) -> Result<Vec<RoutedEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if n == 1 {
            if line.trim() != EVENT_HEADER {
                return Err(perr(1, format!("expected header '{EVENT_HEADER}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split(',');
        let t: Timestamp = field(n, "t", f.next())?;
        let object: u64 = field(n, "object_id", f.next())?;
        let col: u32 = field(n, "cell_col", f.next())?;
        let row: u32 = field(n, "cell_row", f.next())?;
        let kind = match f.next().map(str::trim) {
            Some("E") => EventKind::Enter,
            Some("X") => EventKind::Exit,
            other => return Err(perr(n, format!("bad kind {other:?}, expected E or X"))),
        };
        if f.next().is_some() {
            return Err(perr(n, "too many fields"));
        }
        out.push(RoutedEvent {
            cell: CellId::new(col, row),
            event: CellEvent { object: ObjectId(object), t, kind },
        });
    }
    Ok(out)
}

pub fn write_trajectory_header(mut w: impl Write) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    Ok(())
}

pub fn write_trajectory<T: Float + std::fmt::Display>(mut w: impl Write, object: ObjectId, samples: &[Sample<T>]) -> Result<()> {
    for s in samples {
        writeln!(w, "{},{},{},{}", s.t, object.0, s.x, s.y)?;
    }
    Ok(())
}

/// Samples grouped per object, objects in order of first appearance.
pub fn read_trajectories<T: Float>(r: impl BufRead) -> Result<Vec<(ObjectId, Vec<Sample<T>>)>> {
    let mut out: Vec<(ObjectId, Vec<Sample<T>>)> = Vec::new();
    let mut slot: HashMap<ObjectId, usize> = HashMap::new();
    for (i, line) in r.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if n == 1 {
            if line.trim() != TRAJECTORY_HEADER {
                return Err(perr(1, format!("expected header '{TRAJECTORY_HEADER}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split(',');
        let t: Timestamp = field(n, "t", f.next())?;
        let o = ObjectId(field(n, "object_id", f.next())?);
        let mut coord = |name: &str| -> Result<T> {
            let v = f.next().ok_or_else(|| perr(n, format!("missing field {name}")))?;
            T::from_str_radix(v.trim(), 10).map_err(|_| perr(n, format!("bad {name} '{v}'")))
        };
        let x = coord("x")?;
        let y = coord("y")?;
        let k = *slot.entry(o).or_insert_with(|| {
            out.push((o, Vec::new()));
            out.len() - 1
        });
        out[k].1.push(Sample { t, x, y });
    }
    Ok(out)
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
    /// Column of `s[0]` in the original line, 1-based.
    base: usize,
    line: usize,
}

impl Cursor<'_> {
    fn fail(&self, msg: &str) -> Error {
        perr(self.line, format!("column {}: {msg}", self.base + self.pos))
    }

    fn skip_ws(&mut self) {
        while self.s.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail(&format!("expected '{}'", c as char)))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.s.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.fail("expected a number"));
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| {
                self.pos = start;
                self.fail("number out of range")
            })
    }

    fn end(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.fail("unexpected trailing input")),
        }
    }
}

fn parse_cell(c: &mut Cursor) -> Result<CellId> {
    c.expect(b'(')?;
    let col = c.number()?;
    c.expect(b',')?;
    let row = c.number()?;
    c.expect(b')')?;
    let fit = |v: u64| u32::try_from(v).map_err(|_| c.fail("cell index out of range"));
    Ok(CellId::new(fit(col)?, fit(row)?))
}

/// One line of a query file. Blank lines and `#` comments give `None`.
pub fn parse_query_line(line_no: usize, line: &str) -> Result<Option<StpQuery>> {
    let body = line.split('#').next().unwrap_or("");
    let trimmed = body.trim_start();
    if trimmed.trim().is_empty() {
        return Ok(None);
    }
    let lead = body.len() - trimmed.len();
    let (tag, rest) = trimmed.split_at(trimmed.find(char::is_whitespace).unwrap_or(trimmed.len()));
    let mut col = lead + tag.len() + 1;
    let time = match tag {
        "TIME" => true,
        "ORDER" => false,
        _ => return Err(perr(line_no, format!("column {}: expected TIME or ORDER", lead + 1))),
    };
    let mut time_preds = Vec::new();
    let mut cells = Vec::new();
    for part in rest.split(';') {
        let mut c = Cursor { s: part.as_bytes(), pos: 0, base: col, line: line_no };
        let cell = parse_cell(&mut c)?;
        if time {
            c.expect(b'@')?;
            let tc = if c.peek() == Some(b'[') {
                c.expect(b'[')?;
                let a = c.number()?;
                c.expect(b',')?;
                let b = c.number()?;
                c.expect(b']')?;
                if a > b {
                    return Err(c.fail(&format!("interval [{a},{b}] is reversed")));
                }
                TemporalConstraint::Interval(a, b)
            } else {
                TemporalConstraint::Instant(c.number()?)
            };
            time_preds.push((cell, tc));
        } else {
            cells.push(cell);
        }
        c.end()?;
        col += part.len() + 1;
    }
    let q = if time { StpQuery::with_time(time_preds) } else { StpQuery::with_order(cells) };
    q.map(Some).map_err(|e| perr(line_no, e.to_string()))
}

pub fn read_queries(r: impl BufRead) -> Result<Vec<StpQuery>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        if let Some(q) = parse_query_line(i + 1, &line?)? {
            out.push(q);
        }
    }
    Ok(out)
}

pub fn write_queries(mut w: impl Write, queries: &[StpQuery]) -> Result<()> {
    for q in queries {
        writeln!(w, "{q}")?;
    }
    Ok(())
}

/// `O1,O4 io=7`, or `io=3` for an empty answer.
pub fn format_result(objects: &[ObjectId], reads: u64) -> String {
    let ids: Vec<String> = objects.iter().map(ToString::to_string).collect();
    if ids.is_empty() {
        format!("io={reads}")
    } else {
        format!("{} io={reads}", ids.join(","))
    }
}
