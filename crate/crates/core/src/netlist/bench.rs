// SPDX-License-Identifier: Apache-2.0
//! ISCAS89 `.bench` reader and writer.

use std::fmt::Write as _;

use log::warn;

use super::{CellKind, Netlist, NetlistBuilder, NetlistError, ParseOptions, FF_D, MUX_SEL, SDFF_SE, SDFF_SI};

pub fn parse_bench(text: &str) -> Result<Netlist, NetlistError> {
    parse_bench_with(text, ParseOptions::default())
}

pub fn parse_bench_with(text: &str, opts: ParseOptions) -> Result<Netlist, NetlistError> {
    let mut b = NetlistBuilder::new("bench", opts);
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let err = |col: usize, msg: &str| NetlistError::Syntax { line: line_no, col, msg: msg.to_string() };
        let col_of = |s: &str| s.as_ptr() as usize - raw.as_ptr() as usize + 1;

        if let Some(eq) = line.find('=') {
            let lhs = line[..eq].trim();
            let rhs = &line[eq + 1..];
            if !is_signal(lhs) {
                return Err(err(col_of(line), "expected signal name before `=`"));
            }
            let (func, args) = split_call(rhs).ok_or_else(|| err(col_of(rhs.trim_start()), "expected `FUNC(args)`"))?;
            let kind =
                CellKind::from_keyword(func).ok_or_else(|| err(col_of(rhs.trim_start()), &format!("unknown gate `{func}`")))?;
            for a in &args {
                if !is_signal(a) {
                    return Err(err(col_of(rhs.trim_start()), &format!("bad signal name `{a}`")));
                }
            }
            b.cell(kind, lhs, &args, lhs)?;
        } else {
            let (kw, args) = split_call(line).ok_or_else(|| err(col_of(line.trim_start()), "expected declaration"))?;
            if args.len() != 1 || !is_signal(args[0]) {
                return Err(err(col_of(line.trim_start()), "port declaration takes one signal"));
            }
            match kw.to_ascii_uppercase().as_str() {
                "INPUT" => {
                    b.input(args[0])?;
                }
                "OUTPUT" => {
                    b.output(args[0])?;
                }
                _ => return Err(err(col_of(line.trim_start()), &format!("unknown keyword `{kw}`"))),
            }
        }
    }
    b.finish()
}

fn is_signal(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | '$' | '/'))
}

/// Split `NAME(a, b, c)` into `("NAME", ["a","b","c"])`.
fn split_call(s: &str) -> Option<(&str, Vec<&str>)> {
    let s = s.trim();
    let open = s.find('(')?;
    if !s.ends_with(')') {
        return None;
    }
    let name = s[..open].trim();
    if name.is_empty() {
        return None;
    }
    let inner = &s[open + 1..s.len() - 1];
    let args: Vec<&str> = inner.split(',').map(str::trim).collect();
    if args.iter().any(|a| a.is_empty()) {
        return None;
    }
    Some((name, args))
}

/// Emit `.bench` text. `MUX2` and `SDFF` cells have no `.bench` primitive
/// and are expanded into `AND`/`OR`/`NOT` logic (plus a plain `DFF`).
///
/// Flip-flops are written first, in scan order, so reparsing preserves the
/// flip-flop ordering.
pub fn write_bench(n: &Netlist) -> String {
    let mut out = String::new();
    let mut namer = Namer { taken: n.nets().iter().map(|x| x.name.clone()).collect() };
    for &i in n.inputs() {
        let _ = writeln!(out, "INPUT({})", n.net_name(i));
    }
    for &o in n.outputs() {
        let _ = writeln!(out, "OUTPUT({})", n.net_name(o));
    }
    let mut lowered = false;
    let mut deferred = String::new();
    for &f in n.ffs() {
        let c = n.cell(f);
        let q = n.net_name(c.output);
        match c.kind {
            CellKind::Dff => {
                let _ = writeln!(out, "{q} = DFF({})", n.net_name(c.inputs[FF_D]));
            }
            CellKind::Sdff => {
                lowered = true;
                let d = n.net_name(c.inputs[FF_D]);
                let si = n.net_name(c.inputs[SDFF_SI]);
                let se = n.net_name(c.inputs[SDFF_SE]);
                let m = namer.fresh(format!("{q}__sd"));
                let _ = writeln!(out, "{q} = DFF({m})");
                mux_lines(&mut deferred, &mut namer, &m, d, si, se);
            }
            _ => unreachable!("non-sequential cell in flip-flop list"),
        }
    }
    out.push_str(&deferred);
    for c in n.cells() {
        if c.kind.is_sequential() {
            continue;
        }
        let y = n.net_name(c.output);
        if c.kind == CellKind::Mux2 {
            lowered = true;
            mux_lines(&mut out, &mut namer, y, n.net_name(c.inputs[0]), n.net_name(c.inputs[1]), n.net_name(c.inputs[MUX_SEL]));
            continue;
        }
        let args: Vec<&str> = c.inputs.iter().map(|&i| n.net_name(i)).collect();
        let _ = writeln!(out, "{y} = {}({})", c.kind.keyword(), args.join(", "));
    }
    if lowered {
        warn!("netlist `{}`: MUX2/SDFF cells lowered to AND/OR/NOT for .bench output", n.name());
    }
    out
}

struct Namer {
    taken: std::collections::HashSet<String>,
}

impl Namer {
    fn fresh(&mut self, base: String) -> String {
        let mut name = base.clone();
        let mut i = 1;
        while self.taken.contains(&name) {
            name = format!("{base}{i}");
            i += 1;
        }
        self.taken.insert(name.clone());
        name
    }
}

/// `y = sel ? in1 : in0` as four `.bench` lines.
fn mux_lines(out: &mut String, namer: &mut Namer, y: &str, in0: &str, in1: &str, sel: &str) {
    let ns = namer.fresh(format!("{y}__ns"));
    let a0 = namer.fresh(format!("{y}__a0"));
    let a1 = namer.fresh(format!("{y}__a1"));
    let _ = writeln!(out, "{ns} = NOT({sel})");
    let _ = writeln!(out, "{a0} = AND({in0}, {ns})");
    let _ = writeln!(out, "{a1} = AND({in1}, {sel})");
    let _ = writeln!(out, "{y} = OR({a0}, {a1})");
}
