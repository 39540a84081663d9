// SPDX-License-Identifier: Apache-2.0

//! State-transition tables written as markdown pipe tables.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::verilog::{Direction, ModuleHeader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnRole {
    CurrentState,
    Input,
    NextState,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SttCell {
    Value(String),
    Wildcard,
}

impl fmt::Display for SttCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SttCell::Value(v) => f.write_str(v),
            SttCell::Wildcard => f.write_str("X"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTransitionTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<SttCell>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SttError {
    #[error("no markdown table found")]
    NoTable,
    #[error("table has no data rows")]
    NoRows,
    #[error("row {row}: expected {expected} cells, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("cannot tell the role of column {0:?}")]
    UnresolvedColumn(String),
    #[error("expected one {role} column, found {count}")]
    StateColumns { role: &'static str, count: usize },
}

fn separator() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\|?\s*:?-{3,}:?\s*(\|\s*:?-{3,}:?\s*)*\|?\s*$").unwrap())
}

fn split_row(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = t.strip_suffix('|').unwrap_or(t);
    t.split('|').map(|c| c.trim().to_string()).collect()
}

fn cell(text: &str) -> SttCell {
    match text {
        "X" | "x" | "-" | "" => SttCell::Wildcard,
        v => SttCell::Value(v.to_string()),
    }
}

/// Port direction for a column title, accepting bit and part selects.
fn port_direction(header: &ModuleHeader, name: &str) -> Option<Direction> {
    let base = name.split('[').next().unwrap_or(name).trim();
    header.port(base).map(|p| p.direction)
}

fn heuristic_role(name: &str) -> Option<ColumnRole> {
    let lower = name.to_ascii_lowercase();
    if lower.contains("next") {
        Some(ColumnRole::NextState)
    } else if lower.contains("current") || lower.contains("present") || lower == "state" {
        Some(ColumnRole::CurrentState)
    } else {
        None
    }
}

fn resolve_roles(names: &[String], header: Option<&ModuleHeader>) -> Result<Vec<ColumnRole>, SttError> {
    let has_ports = header.is_some_and(|h| !h.ports.is_empty());
    let mut roles: Vec<Option<ColumnRole>> = names
        .iter()
        .map(|n| {
            let by_port = header.and_then(|h| port_direction(h, n)).map(|d| match d {
                Direction::Output => ColumnRole::Output,
                _ => ColumnRole::Input,
            });
            by_port.or_else(|| heuristic_role(n))
        })
        .collect();
    if !has_ports {
        // positional: columns before the next-state column are inputs,
        // the ones after it outputs
        let next_at = roles.iter().position(|r| *r == Some(ColumnRole::NextState));
        for (i, r) in roles.iter_mut().enumerate() {
            if r.is_none() {
                *r = Some(match next_at {
                    Some(n) if i > n => ColumnRole::Output,
                    _ => ColumnRole::Input,
                });
            }
        }
    }
    let roles = roles
        .into_iter()
        .zip(names)
        .map(|(r, n)| r.ok_or_else(|| SttError::UnresolvedColumn(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    for (role, label) in [(ColumnRole::CurrentState, "current-state"), (ColumnRole::NextState, "next-state")] {
        let count = roles.iter().filter(|r| **r == role).count();
        if count != 1 {
            return Err(SttError::StateColumns { role: label, count });
        }
    }
    Ok(roles)
}

impl StateTransitionTable {
    pub fn column(&self, role: ColumnRole) -> Option<usize> {
        self.columns.iter().position(|c| c.role == role)
    }

    pub fn states(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for role in [ColumnRole::CurrentState, ColumnRole::NextState] {
            if let Some(c) = self.column(role) {
                for row in &self.rows {
                    if let SttCell::Value(v) = &row[c] {
                        if !out.contains(v) {
                            out.push(v.clone());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].to_string().len())
                    .chain([self.columns[c].name.len(), 3])
                    .max()
                    .unwrap_or(3)
            })
            .collect();
        let line = |cells: Vec<String>| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!(" {c:<w$} ")).collect();
            format!("|{}|", padded.join("|"))
        };
        let mut out = vec![
            line(self.columns.iter().map(|c| c.name.clone()).collect()),
            format!("|{}|", widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")),
        ];
        out.extend(self.rows.iter().map(|r| line(r.iter().map(ToString::to_string).collect())));
        out.join("\n")
    }
}

/// Parse the first pipe table in `text`. Column roles come from the module's
/// ports where a column names one, otherwise from the column title.
pub fn parse_stt(text: &str, header: Option<&ModuleHeader>) -> Result<StateTransitionTable, SttError> {
    let lines: Vec<&str> = text.lines().collect();
    let start = (0..lines.len().saturating_sub(1))
        .find(|&i| lines[i].contains('|') && separator().is_match(lines[i + 1]))
        .ok_or(SttError::NoTable)?;
    let names = split_row(lines[start]);
    let mut rows = Vec::new();
    for line in &lines[start + 2..] {
        if !line.contains('|') || line.trim().is_empty() {
            break;
        }
        let cells = split_row(line);
        if cells.len() != names.len() {
            return Err(SttError::Ragged {
                row: rows.len(),
                expected: names.len(),
                found: cells.len(),
            });
        }
        rows.push(cells.iter().map(|c| cell(c)).collect::<Vec<_>>());
    }
    if rows.is_empty() {
        return Err(SttError::NoRows);
    }
    let roles = resolve_roles(&names, header)?;
    Ok(StateTransitionTable {
        columns: names.into_iter().zip(roles).map(|(name, role)| Column { name, role }).collect(),
        rows,
    })
}
