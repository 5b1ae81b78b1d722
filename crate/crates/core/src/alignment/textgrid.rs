//! Long-format ("ooTextFile") Praat TextGrid reader and writer.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for boundary comparisons, in seconds.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub xmin: f64,
    pub xmax: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGridDoc {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<IntervalTier>,
}

/// Names of the tiers the alignment is built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierNames {
    pub phones: String,
    pub words: String,
}

impl Default for TierNames {
    fn default() -> Self {
        Self {
            phones: "phones".into(),
            words: "words".into(),
        }
    }
}

impl TextGridDoc {
    pub fn tier(&self, name: &str) -> Option<&IntervalTier> {
        self.tiers.iter().find(|t| t.name == name)
    }
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        Self {
            lines: text.lines().collect(),
            next: 0,
        }
    }

    fn err<T>(&self, line: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line,
            msg: msg.into(),
        })
    }

    /// Next non-blank line, trimmed, with its 1-based number.
    fn next_line(&mut self, expecting: &str) -> Result<(usize, &'a str)> {
        while self.next < self.lines.len() {
            let line = self.lines[self.next].trim();
            self.next += 1;
            if !line.is_empty() {
                return Ok((self.next, line));
            }
        }
        self.err(self.lines.len().max(1), format!("unexpected end of input, expected {expecting}"))
    }

    fn expect_exact(&mut self, want: &str) -> Result<usize> {
        let (no, line) = self.next_line(want)?;
        if line != want {
            return self.err(no, format!("expected `{want}`, found `{line}`"));
        }
        Ok(no)
    }

    /// Reads `key = value` and returns the raw value text.
    fn expect_key(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (no, line) = self.next_line(key)?;
        let rest = line
            .strip_prefix(key)
            .map(str::trim_start)
            .and_then(|r| r.strip_prefix('='));
        match rest {
            Some(value) => Ok((no, value.trim())),
            None => self.err(no, format!("expected `{key} = ...`, found `{line}`")),
        }
    }

    fn number(&mut self, key: &str) -> Result<f64> {
        let (no, raw) = self.expect_key(key)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => self.err(no, format!("`{key}` is not a finite number: `{raw}`")),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (no, raw) = self.expect_key(key)?;
        raw.parse::<usize>()
            .or_else(|_| self.err(no, format!("`{key}` is not a count: `{raw}`")))
    }

    /// Quoted string with `""` escapes; may continue over several lines.
    fn string(&mut self, key: &str) -> Result<String> {
        self.string_at(key).map(|(_, s)| s)
    }

    fn string_at(&mut self, key: &str) -> Result<(usize, String)> {
        let (no, raw) = self.expect_key(key)?;
        let Some(first) = raw.strip_prefix('"') else {
            return self.err(no, format!("`{key}` must be a quoted string"));
        };
        let mut text = first.to_string();
        loop {
            match unquote(&text) {
                Some((value, tail)) if tail.trim().is_empty() => return Ok((no, value)),
                Some((_, tail)) => {
                    return self.err(no, format!("trailing text after string: `{}`", tail.trim()))
                }
                None if self.next < self.lines.len() => {
                    text.push('\n');
                    text.push_str(self.lines[self.next]);
                    self.next += 1;
                }
                None => return self.err(no, format!("unterminated string for `{key}`")),
            }
        }
    }
}

/// Splits `body"tail` at the closing quote, undoubling `""`.
fn unquote(text: &str) -> Option<(String, &str)> {
    let mut out = String::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '"' {
            if matches!(chars.peek(), Some((_, '"'))) {
                chars.next();
                out.push('"');
                continue;
            }
            return Some((out, &text[i + 1..]));
        }
        out.push(c);
    }
    None
}

fn quote(label: &str) -> String {
    format!("\"{}\"", label.replace('"', "\"\""))
}

/// Parses a long-format TextGrid and checks that the default `phones` and
/// `words` tiers are present.
pub fn parse_textgrid(text: &str) -> Result<TextGridDoc> {
    parse_textgrid_with(text, &TierNames::default())
}

pub fn parse_textgrid_with(text: &str, required: &TierNames) -> Result<TextGridDoc> {
    let doc = parse_any(text)?;
    for name in [&required.phones, &required.words] {
        if doc.tier(name).is_none() {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                msg: format!("missing tier `{name}`"),
            });
        }
    }
    Ok(doc)
}

fn parse_any(text: &str) -> Result<TextGridDoc> {
    let mut lines = Lines::new(text);
    let file_type = lines.string("File type")?;
    if file_type != "ooTextFile" {
        return lines.err(1, format!("unsupported file type `{file_type}`"));
    }
    let class = lines.string("Object class")?;
    if class != "TextGrid" {
        return lines.err(2, format!("object class `{class}` is not TextGrid"));
    }
    let xmin = lines.number("xmin")?;
    let xmax = lines.number("xmax")?;
    if !(xmin < xmax) {
        return lines.err(lines.next, format!("TextGrid xmin {xmin} >= xmax {xmax}"));
    }
    lines.expect_exact("tiers? <exists>")?;
    let n_tiers = lines.count("size")?;
    lines.expect_exact("item []:")?;

    let mut tiers = Vec::with_capacity(n_tiers);
    for t in 1..=n_tiers {
        lines.expect_exact(&format!("item [{t}]:"))?;
        let (class_line, class) = lines.string_at("class")?;
        if class != "IntervalTier" {
            return lines.err(class_line, format!("tier {t}: unsupported tier class `{class}`"));
        }
        let name = lines.string("name")?;
        let tier_xmin = lines.number("xmin")?;
        let tier_xmax = lines.number("xmax")?;
        let n_intervals = lines.count("intervals: size")?;
        let mut intervals = Vec::with_capacity(n_intervals);
        let mut last_line = lines.next;
        for k in 1..=n_intervals {
            lines.expect_exact(&format!("intervals [{k}]:"))?;
            let a = lines.number("xmin")?;
            let b = lines.number("xmax")?;
            let label = lines.string("text")?;
            last_line = lines.next;
            intervals.push((last_line, Interval { xmin: a, xmax: b, label }));
        }
        let tier = IntervalTier {
            name,
            xmin: tier_xmin,
            xmax: tier_xmax,
            intervals: Vec::new(),
        };
        tiers.push(validate_tier(tier, intervals, xmin, xmax, last_line)?);
    }
    if let Ok((no, line)) = lines.next_line("end of input") {
        return lines.err(no, format!("unexpected trailing content `{line}`"));
    }
    Ok(TextGridDoc { xmin, xmax, tiers })
}

fn validate_tier(
    mut tier: IntervalTier,
    intervals: Vec<(usize, Interval)>,
    doc_xmin: f64,
    doc_xmax: f64,
    tier_line: usize,
) -> Result<IntervalTier> {
    let fail = |line: usize, msg: String| -> Result<IntervalTier> {
        Err(Error::Parse {
            line,
            msg: format!("tier `{}`: {msg}", tier.name),
        })
    };
    if tier.xmin < doc_xmin - TIME_EPS || tier.xmax > doc_xmax + TIME_EPS {
        return fail(
            tier_line,
            format!(
                "span [{}, {}] outside TextGrid [{doc_xmin}, {doc_xmax}]",
                tier.xmin, tier.xmax
            ),
        );
    }
    let Some((first_line, first)) = intervals.first() else {
        return fail(tier_line, "no intervals".into());
    };
    if (first.xmin - tier.xmin).abs() > TIME_EPS {
        return fail(*first_line, format!("first interval starts at {} not {}", first.xmin, tier.xmin));
    }
    let mut prev_end = tier.xmin;
    for (line, iv) in &intervals {
        if !(iv.xmin < iv.xmax) {
            return fail(*line, format!("interval [{}, {}] is empty or reversed", iv.xmin, iv.xmax));
        }
        if iv.xmin < prev_end - TIME_EPS {
            return fail(*line, format!("overlapping intervals at {} < {prev_end}", iv.xmin));
        }
        if iv.xmin > prev_end + TIME_EPS {
            return fail(*line, format!("gap between {prev_end} and {}", iv.xmin));
        }
        prev_end = iv.xmax;
    }
    if (prev_end - tier.xmax).abs() > TIME_EPS {
        let line = intervals.last().map(|(l, _)| *l).unwrap_or(tier_line);
        return fail(line, format!("last interval ends at {prev_end} not {}", tier.xmax));
    }
    tier.intervals = intervals.into_iter().map(|(_, iv)| iv).collect();
    Ok(tier)
}

/// Writes the long TextGrid dialect. `parse_textgrid(serialize_textgrid(d)) == d`.
pub fn serialize_textgrid(doc: &TextGridDoc) -> String {
    let mut s = String::new();
    // Writing to a String cannot fail.
    let _ = writeln!(s, "File type = \"ooTextFile\"");
    let _ = writeln!(s, "Object class = \"TextGrid\"");
    let _ = writeln!(s);
    let _ = writeln!(s, "xmin = {}", doc.xmin);
    let _ = writeln!(s, "xmax = {}", doc.xmax);
    let _ = writeln!(s, "tiers? <exists>");
    let _ = writeln!(s, "size = {}", doc.tiers.len());
    let _ = writeln!(s, "item []:");
    for (t, tier) in doc.tiers.iter().enumerate() {
        let _ = writeln!(s, "    item [{}]:", t + 1);
        let _ = writeln!(s, "        class = \"IntervalTier\"");
        let _ = writeln!(s, "        name = {}", quote(&tier.name));
        let _ = writeln!(s, "        xmin = {}", tier.xmin);
        let _ = writeln!(s, "        xmax = {}", tier.xmax);
        let _ = writeln!(s, "        intervals: size = {}", tier.intervals.len());
        for (k, iv) in tier.intervals.iter().enumerate() {
            let _ = writeln!(s, "        intervals [{}]:", k + 1);
            let _ = writeln!(s, "            xmin = {}", iv.xmin);
            let _ = writeln!(s, "            xmax = {}", iv.xmax);
            let _ = writeln!(s, "            text = {}", quote(&iv.label));
        }
    }
    s
}
