// SPDX-License-Identifier: Apache-2.0
//! Single-module structural Verilog: reader for a gate-level subset and a
//! deterministic writer.
//!
//! Accepted items: `input`/`output`/`wire` declarations (vectors are
//! bit-blasted into `name[i]` nets), gate primitives (`and`, `or`, `nand`,
//! `nor`, `xor`, `xnor`, `not`, `buf`), named cells (`MUX2`, `DFF`, `SDFF`
//! and upper-case gate names with optional arity suffix, e.g. `XOR2`) with
//! positional or `.PIN(net)` connections, and `assign a = b;` aliases.
//! Inputs that only reach flip-flop clock pins are treated as the clock and
//! dropped from the port list.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::{CellKind, Netlist, NetlistBuilder, NetlistError, ParseOptions, FF_D, MUX_SEL, SDFF_SE, SDFF_SI};

pub fn parse_verilog_subset(text: &str) -> Result<Netlist, NetlistError> {
    parse_verilog_subset_with(text, ParseOptions::default())
}

pub fn parse_verilog_subset_with(text: &str, opts: ParseOptions) -> Result<Netlist, NetlistError> {
    let toks = tokenize(text)?;
    Parser { toks, pos: 0 }.module(opts)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, NetlistError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, '/');
            advance(&mut i, &mut line, &mut col, '*');
            loop {
                if i >= chars.len() {
                    return Err(NetlistError::Syntax { line: tl, col: tc, msg: "unterminated block comment".into() });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(&mut i, &mut line, &mut col, '*');
                    advance(&mut i, &mut line, &mut col, '/');
                    break;
                }
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
        } else if c == '\\' {
            // escaped identifier, terminated by whitespace
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            while i < chars.len() && !chars[i].is_whitespace() {
                s.push(chars[i]);
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                s.push(chars[i]);
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '\'' || chars[i] == '_') {
                s.push(chars[i]);
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            out.push(Token { tok: Tok::Number(s), line: tl, col: tc });
        } else if "();,.[]:=#@{}+-*&|^~!?<>'\"`".contains(c) {
            advance(&mut i, &mut line, &mut col, c);
            out.push(Token { tok: Tok::Sym(c), line: tl, col: tc });
        } else {
            return Err(NetlistError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

const UNSUPPORTED: &[&str] = &[
    "always",
    "initial",
    "reg",
    "integer",
    "parameter",
    "localparam",
    "function",
    "task",
    "generate",
    "genvar",
    "inout",
    "supply0",
    "supply1",
    "tri",
    "specify",
    "defparam",
    "case",
    "if",
    "begin",
    "posedge",
    "negedge",
];

/// A connection to a net bit, `name` or `name[idx]`.
#[derive(Debug, Clone)]
struct Conn {
    name: String,
    line: usize,
}

#[derive(Debug)]
struct Inst {
    kind: CellKind,
    name: String,
    /// Output first, then inputs in pin order.
    out: Conn,
    ins: Vec<Conn>,
    clock: Option<Conn>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn eof_err(&self) -> NetlistError {
        let (line, col) = self.toks.last().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        NetlistError::Syntax { line, col, msg: "unexpected end of input".into() }
    }

    fn next(&mut self) -> Result<Token, NetlistError> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| self.eof_err())?;
        self.pos += 1;
        Ok(t)
    }

    fn syntax(t: &Token, msg: impl Into<String>) -> NetlistError {
        NetlistError::Syntax { line: t.line, col: t.col, msg: msg.into() }
    }

    fn expect_sym(&mut self, c: char) -> Result<Token, NetlistError> {
        let t = self.next()?;
        if t.tok != Tok::Sym(c) {
            return Err(Self::syntax(&t, format!("expected `{c}`")));
        }
        Ok(t)
    }

    fn is_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(x), .. }) if *x == c)
    }

    fn ident(&mut self) -> Result<(String, Token), NetlistError> {
        let t = self.next()?;
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            _ => Err(Self::syntax(&t, "expected identifier")),
        }
    }

    fn number(&mut self) -> Result<i64, NetlistError> {
        let t = self.next()?;
        match &t.tok {
            Tok::Number(s) => s.parse::<i64>().map_err(|_| NetlistError::Unsupported { line: t.line, token: s.clone() }),
            _ => Err(Self::syntax(&t, "expected number")),
        }
    }

    /// `[msb:lsb]`, if present.
    fn range(&mut self) -> Result<Option<(i64, i64)>, NetlistError> {
        if !self.is_sym('[') {
            return Ok(None);
        }
        self.next()?;
        let msb = self.number()?;
        self.expect_sym(':')?;
        let lsb = self.number()?;
        self.expect_sym(']')?;
        Ok(Some((msb, lsb)))
    }

    fn conn(&mut self) -> Result<Conn, NetlistError> {
        let t = self.peek().cloned().ok_or_else(|| self.eof_err())?;
        match &t.tok {
            Tok::Ident(_) => {}
            Tok::Number(s) => return Err(NetlistError::Unsupported { line: t.line, token: s.clone() }),
            Tok::Sym(c) => return Err(NetlistError::Unsupported { line: t.line, token: c.to_string() }),
        }
        let (name, t) = self.ident()?;
        if self.is_sym('[') {
            self.next()?;
            let idx = self.number()?;
            if self.is_sym(':') {
                return Err(NetlistError::Unsupported { line: t.line, token: format!("{name}[..:..]") });
            }
            self.expect_sym(']')?;
            return Ok(Conn { name: format!("{name}[{idx}]"), line: t.line });
        }
        Ok(Conn { name, line: t.line })
    }

    fn module(mut self, opts: ParseOptions) -> Result<Netlist, NetlistError> {
        // Skip anything before `module` only if it is a compiler directive-free file.
        let (kw, t) = self.ident()?;
        if kw != "module" {
            return Err(Self::syntax(&t, "expected `module`"));
        }
        let (mod_name, _) = self.ident()?;

        let mut inputs: Vec<String> = Vec::new();
        let mut outputs: Vec<String> = Vec::new();
        let mut vectors: HashMap<String, Vec<String>> = HashMap::new();
        let mut declared: HashSet<String> = HashSet::new();
        let mut insts: Vec<Inst> = Vec::new();
        let mut aliases: Vec<(Conn, Conn)> = Vec::new();

        if self.is_sym('#') {
            let t = self.next()?;
            return Err(NetlistError::Unsupported { line: t.line, token: "#(parameters)".into() });
        }
        if self.is_sym('(') {
            self.next()?;
            if !self.is_sym(')') {
                loop {
                    // ANSI-style header declarations are accepted too.
                    let save = self.pos;
                    let (w, _) = self.ident()?;
                    if w == "input" || w == "output" || w == "wire" {
                        self.decl_body(&w, &mut inputs, &mut outputs, &mut vectors, &mut declared, true)?;
                    } else {
                        self.pos = save;
                        self.ident()?;
                    }
                    if self.is_sym(',') {
                        self.next()?;
                        continue;
                    }
                    break;
                }
            }
            self.expect_sym(')')?;
        }
        self.expect_sym(';')?;

        loop {
            let (w, t) = self.ident()?;
            match w.as_str() {
                "endmodule" => break,
                "input" | "output" | "wire" => {
                    self.decl_body(&w, &mut inputs, &mut outputs, &mut vectors, &mut declared, false)?;
                    self.expect_sym(';')?;
                }
                "assign" => {
                    let lhs = self.conn()?;
                    self.expect_sym('=')?;
                    let rhs = self.conn()?;
                    if !self.is_sym(';') {
                        let t = self.next()?;
                        let token = match t.tok {
                            Tok::Sym(c) => c.to_string(),
                            Tok::Ident(s) | Tok::Number(s) => s,
                        };
                        return Err(NetlistError::Unsupported { line: t.line, token });
                    }
                    self.expect_sym(';')?;
                    aliases.push((lhs, rhs));
                }
                "module" => return Err(NetlistError::Unsupported { line: t.line, token: "module (hierarchy)".into() }),
                other if UNSUPPORTED.contains(&other) => {
                    return Err(NetlistError::Unsupported { line: t.line, token: other.to_string() })
                }
                other => {
                    let (kind, primitive) = match primitive_kind(other) {
                        Some(k) => (k, true),
                        None => match cell_kind(other) {
                            Some(k) => (k, false),
                            None => return Err(NetlistError::Unsupported { line: t.line, token: other.to_string() }),
                        },
                    };
                    if self.is_sym('#') {
                        let t = self.next()?;
                        return Err(NetlistError::Unsupported { line: t.line, token: "#delay".into() });
                    }
                    loop {
                        let name = if let Some(Token { tok: Tok::Ident(_), .. }) = self.peek() {
                            self.ident()?.0
                        } else {
                            format!("_anon{}", insts.len())
                        };
                        let inst = self.instance(kind, primitive, name, &t)?;
                        insts.push(inst);
                        if self.is_sym(',') {
                            self.next()?;
                            continue;
                        }
                        break;
                    }
                    self.expect_sym(';')?;
                }
            }
        }
        if let Some(t) = self.peek() {
            let token = match &t.tok {
                Tok::Ident(s) | Tok::Number(s) => s.clone(),
                Tok::Sym(c) => c.to_string(),
            };
            return Err(NetlistError::Unsupported { line: t.line, token });
        }

        // Resolve `assign` aliases to their representative net.
        let mut alias: HashMap<String, String> = HashMap::new();
        for (lhs, rhs) in &aliases {
            let root = resolve(&alias, &rhs.name);
            if root == lhs.name {
                return Err(NetlistError::CombinationalCycle(vec![lhs.name.clone()]));
            }
            if alias.insert(lhs.name.clone(), root).is_some() {
                return Err(NetlistError::DuplicateDriver(lhs.name.clone()));
            }
        }
        let r = |s: &str| resolve(&alias, s);

        let clock_nets: HashSet<String> = insts.iter().filter_map(|i| i.clock.as_ref().map(|c| r(&c.name))).collect();
        let data_nets: HashSet<String> =
            insts.iter().flat_map(|i| i.ins.iter().map(|c| r(&c.name))).chain(outputs.iter().map(|o| r(o))).collect();

        let mut b = NetlistBuilder::new(mod_name, opts);
        for i in &inputs {
            if clock_nets.contains(i) && !data_nets.contains(i) {
                continue;
            }
            b.input(i)?;
        }
        for o in &outputs {
            b.output(&r(o))?;
        }
        for inst in &insts {
            for c in inst.ins.iter().chain(std::iter::once(&inst.out)) {
                if vectors.contains_key(&c.name) {
                    return Err(NetlistError::Unsupported { line: c.line, token: format!("{} (whole vector)", c.name) });
                }
            }
            let ins: Vec<String> = inst.ins.iter().map(|c| r(&c.name)).collect();
            let ins_ref: Vec<&str> = ins.iter().map(String::as_str).collect();
            if alias.contains_key(&inst.out.name) {
                return Err(NetlistError::DuplicateDriver(inst.out.name.clone()));
            }
            b.cell(inst.kind, &inst.name, &ins_ref, &inst.out.name)?;
        }
        b.finish()
    }

    #[allow(clippy::too_many_arguments)]
    fn decl_body(
        &mut self,
        dir: &str,
        inputs: &mut Vec<String>,
        outputs: &mut Vec<String>,
        vectors: &mut HashMap<String, Vec<String>>,
        declared: &mut HashSet<String>,
        in_header: bool,
    ) -> Result<(), NetlistError> {
        if let Some(Token { tok: Tok::Ident(w), line, .. }) = self.peek() {
            if w == "reg" || w == "signed" {
                return Err(NetlistError::Unsupported { line: *line, token: w.clone() });
            }
            if w == "wire" {
                self.next()?;
            }
        }
        let range = self.range()?;
        loop {
            let (name, t) = self.ident()?;
            let bits: Vec<String> = match range {
                None => vec![name.clone()],
                Some((msb, lsb)) => {
                    let v: Vec<String> = if msb >= lsb {
                        (lsb..=msb).rev().map(|i| format!("{name}[{i}]")).collect()
                    } else {
                        (msb..=lsb).map(|i| format!("{name}[{i}]")).collect()
                    };
                    vectors.insert(name.clone(), v.clone());
                    v
                }
            };
            match dir {
                "input" => {
                    for bit in &bits {
                        if !declared.insert(format!("in:{bit}")) {
                            return Err(Self::syntax(&t, format!("`{bit}` declared twice")));
                        }
                    }
                    inputs.extend(bits)
                }
                "output" => {
                    for bit in &bits {
                        if !declared.insert(format!("out:{bit}")) {
                            return Err(Self::syntax(&t, format!("`{bit}` declared twice")));
                        }
                    }
                    outputs.extend(bits)
                }
                _ => {}
            }
            if self.is_sym(',') {
                // In a header, a comma may start the next declaration.
                if in_header {
                    if let Some(Token { tok: Tok::Ident(w), .. }) = self.toks.get(self.pos + 1) {
                        if w == "input" || w == "output" || w == "wire" {
                            return Ok(());
                        }
                    }
                }
                self.next()?;
                continue;
            }
            return Ok(());
        }
    }

    fn instance(&mut self, kind: CellKind, primitive: bool, name: String, at: &Token) -> Result<Inst, NetlistError> {
        self.expect_sym('(')?;
        let mut positional: Vec<Conn> = Vec::new();
        let mut named: Vec<(String, Conn, usize)> = Vec::new();
        if !self.is_sym(')') {
            loop {
                if self.is_sym('.') {
                    self.next()?;
                    let (pin, pt) = self.ident()?;
                    self.expect_sym('(')?;
                    let c = self.conn()?;
                    self.expect_sym(')')?;
                    named.push((pin.to_ascii_uppercase(), c, pt.line));
                } else {
                    positional.push(self.conn()?);
                }
                if self.is_sym(',') {
                    self.next()?;
                    continue;
                }
                break;
            }
        }
        self.expect_sym(')')?;
        if !named.is_empty() && !positional.is_empty() {
            return Err(Self::syntax(at, "mixed positional and named connections"));
        }
        if primitive || named.is_empty() {
            if positional.is_empty() {
                return Err(Self::syntax(at, "instance without connections"));
            }
            let out = positional.remove(0);
            return Ok(Inst { kind, name, out, ins: positional, clock: None });
        }
        // Named pin connections.
        let mut out = None;
        let mut clock = None;
        let mut slots: Vec<(usize, Conn)> = Vec::new();
        for (pin, c, line) in named {
            let slot = match (kind, pin.as_str()) {
                (_, "Y" | "Z" | "Q" | "O" | "OUT" | "X") => {
                    out = Some(c);
                    continue;
                }
                (CellKind::Dff | CellKind::Sdff, "CK" | "CLK" | "C") => {
                    clock = Some(c);
                    continue;
                }
                (CellKind::Dff | CellKind::Sdff, "D") => FF_D,
                (CellKind::Sdff, "SI" | "SCD" | "TI") => SDFF_SI,
                (CellKind::Sdff, "SE" | "SCE" | "TE") => SDFF_SE,
                (CellKind::Mux2, "A" | "A0" | "I0" | "D0") => 0,
                (CellKind::Mux2, "B" | "A1" | "I1" | "D1") => 1,
                (CellKind::Mux2, "S" | "S0" | "SEL") => MUX_SEL,
                (CellKind::Mux2 | CellKind::Dff | CellKind::Sdff, _) => {
                    return Err(NetlistError::Unsupported { line, token: format!(".{pin}") })
                }
                (_, p) => match gate_pin_index(p) {
                    Some(i) => i,
                    None => return Err(NetlistError::Unsupported { line, token: format!(".{p}") }),
                },
            };
            slots.push((slot, c));
        }
        slots.sort_by_key(|(s, _)| *s);
        for (i, (s, _)) in slots.iter().enumerate() {
            if *s != i {
                return Err(Self::syntax(at, format!("instance `{name}` has missing or duplicate pins")));
            }
        }
        let out = out.ok_or_else(|| Self::syntax(at, format!("instance `{name}` has no output pin")))?;
        Ok(Inst { kind, name, out, ins: slots.into_iter().map(|(_, c)| c).collect(), clock })
    }
}

fn resolve(alias: &HashMap<String, String>, name: &str) -> String {
    let mut cur = name;
    let mut hops = 0;
    while let Some(next) = alias.get(cur) {
        cur = next;
        hops += 1;
        if hops > alias.len() {
            break;
        }
    }
    cur.to_string()
}

/// `A`..`E` or `A1`..`A5`.
fn gate_pin_index(pin: &str) -> Option<usize> {
    let b = pin.as_bytes();
    match b {
        [c] if (b'A'..=b'E').contains(c) => Some((c - b'A') as usize),
        [b'A', d] if (b'1'..=b'5').contains(d) => Some((d - b'1') as usize),
        _ => None,
    }
}

fn primitive_kind(word: &str) -> Option<CellKind> {
    Some(match word {
        "and" => CellKind::And,
        "or" => CellKind::Or,
        "nand" => CellKind::Nand,
        "nor" => CellKind::Nor,
        "xor" => CellKind::Xor,
        "xnor" => CellKind::Xnor,
        "not" => CellKind::Not,
        "buf" => CellKind::Buf,
        _ => return None,
    })
}

/// Named cell types: `MUX2`, `DFF`, `SDFF` and upper-case gate names with an
/// optional arity suffix (`AND2`, `XOR3`, `INV`).
fn cell_kind(word: &str) -> Option<CellKind> {
    if word.chars().any(|c| c.is_ascii_lowercase()) {
        return None;
    }
    if let Some(k) = CellKind::from_keyword(word) {
        return Some(k);
    }
    let base = word.trim_end_matches(|c: char| c.is_ascii_digit());
    match CellKind::from_keyword(base)? {
        CellKind::Mux2 | CellKind::Dff | CellKind::Sdff => None,
        k => Some(k),
    }
}

const KEYWORDS: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "wire",
    "assign",
    "and",
    "or",
    "nand",
    "nor",
    "xor",
    "xnor",
    "not",
    "buf",
    "reg",
    "always",
    "initial",
    "begin",
    "end",
    "if",
    "else",
    "case",
    "parameter",
    "inout",
    "integer",
    "posedge",
    "negedge",
    "supply0",
    "supply1",
    "tri",
    "function",
    "task",
    "generate",
    "genvar",
    "localparam",
    "specify",
    "defparam",
];

fn escape(name: &str) -> String {
    let simple = name.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false)
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
        && !KEYWORDS.contains(&name);
    if simple {
        name.to_string()
    } else {
        format!("\\{name} ")
    }
}

/// Emit structural Verilog accepted by [`parse_verilog_subset`]. Output is a
/// pure function of the netlist: ports in netlist order, wires and
/// instances in id order.
pub fn write_verilog(n: &Netlist) -> String {
    let mut out = String::new();
    let has_ff = !n.ffs().is_empty();
    let net_names: HashSet<&str> = n.nets().iter().map(|x| x.name.as_str()).collect();
    let mut used: HashSet<String> = net_names.iter().map(|s| s.to_string()).collect();
    let clk = if has_ff {
        let mut name = "clk".to_string();
        let mut i = 1;
        while used.contains(&name) {
            name = format!("clk_{i}");
            i += 1;
        }
        used.insert(name.clone());
        Some(name)
    } else {
        None
    };
    let mut fresh = |base: String| -> String {
        let mut name = base.clone();
        let mut i = 1;
        while used.contains(&name) {
            name = format!("{base}_{i}");
            i += 1;
        }
        used.insert(name.clone());
        name
    };

    // Output ports that alias an input, or repeat a net, need their own name.
    let mut seen = HashSet::new();
    let mut out_ports: Vec<(String, Option<String>)> = Vec::new();
    for &o in n.outputs() {
        let name = n.net_name(o).to_string();
        if n.is_input(o) || !seen.insert(o) {
            let port = fresh(format!("{name}__po"));
            out_ports.push((port, Some(name)));
        } else {
            out_ports.push((name, None));
        }
    }

    let mut ports: Vec<String> = n.inputs().iter().map(|&i| escape(n.net_name(i))).collect();
    if let Some(c) = &clk {
        ports.push(escape(c));
    }
    ports.extend(out_ports.iter().map(|(p, _)| escape(p)));
    let _ = writeln!(out, "module {} ({});", escape(n.name()), ports.join(", "));
    for &i in n.inputs() {
        let _ = writeln!(out, "  input {};", escape(n.net_name(i)));
    }
    if let Some(c) = &clk {
        let _ = writeln!(out, "  input {};", escape(c));
    }
    for (p, _) in &out_ports {
        let _ = writeln!(out, "  output {};", escape(p));
    }
    let port_nets: HashSet<&str> = n
        .inputs()
        .iter()
        .map(|&i| n.net_name(i))
        .chain(out_ports.iter().filter(|(_, a)| a.is_none()).map(|(p, _)| p.as_str()))
        .collect();
    for net in n.nets() {
        if !port_nets.contains(net.name.as_str()) {
            let _ = writeln!(out, "  wire {};", escape(&net.name));
        }
    }
    for (p, a) in &out_ports {
        if let Some(src) = a {
            let _ = writeln!(out, "  assign {} = {};", escape(p), escape(src));
        }
    }
    for c in n.cells() {
        let inst = if net_names.contains(c.name.as_str()) || c.name == clk.as_deref().unwrap_or("") {
            format!("u_{}", c.name)
        } else {
            c.name.clone()
        };
        let inst = escape(&inst);
        let y = escape(n.net_name(c.output));
        let ins: Vec<String> = c.inputs.iter().map(|&i| escape(n.net_name(i))).collect();
        let ck = clk.as_deref().map(escape).unwrap_or_default();
        match c.kind {
            CellKind::Mux2 => {
                let _ = writeln!(out, "  MUX2 {inst} (.A({}), .B({}), .S({}), .Y({y}));", ins[0], ins[1], ins[2]);
            }
            CellKind::Dff => {
                let _ = writeln!(out, "  DFF {inst} (.CK({ck}), .D({}), .Q({y}));", ins[0]);
            }
            CellKind::Sdff => {
                let _ = writeln!(out, "  SDFF {inst} (.CK({ck}), .D({}), .SI({}), .SE({}), .Q({y}));", ins[0], ins[1], ins[2]);
            }
            k => {
                let prim = k.keyword().to_ascii_lowercase();
                let _ = writeln!(out, "  {prim} {inst} ({y}, {});", ins.join(", "));
            }
        }
    }
    out.push_str("endmodule\n");
    out
}
