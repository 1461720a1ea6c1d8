//! Document model for HTML/XML exercises.
//!
//! Parsing keeps everything needed for an identity translation to
//! round-trip: attribute order, comments, processing instructions and the
//! exact text of every text node. Two modes are supported:
//!
//! - [`DocFormat::Xml`] is strict and rejects ill-formed input with a
//!   line/column position.
//! - [`DocFormat::Html`] recovers from the small set of omissions that
//!   publisher-generated, near-XHTML content contains: void elements
//!   (`br`, `img`, `hr`, `input`, `meta`, `link`) never take children,
//!   unclosed `p` and `li` are closed implicitly, and tag/attribute names
//!   are case-folded.
//!
//! Serialization is canonical: text is escaped (`&`, `<`, `>`), attribute
//! values additionally escape `"`, empty elements are written `<x/>` in XML
//! mode and `<x></x>` in HTML mode except for void elements (`<br/>`).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Elements that never have children in HTML mode.
pub const VOID_ELEMENTS: &[&str] = &["br", "img", "hr", "input", "meta", "link"];

/// HTML elements whose content is raw text.
const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

/// Starting one of these implicitly closes an open `p` in HTML mode.
const CLOSES_PARAGRAPH: &[&str] = &[
    "p", "div", "ul", "ol", "li", "table", "h1", "h2", "h3", "h4", "h5", "h6", "section",
    "article", "blockquote", "form", "fieldset", "pre", "hr", "dl", "header", "footer", "nav",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocFormat {
    Xml,
    Html,
}

impl fmt::Display for DocFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocFormat::Xml => f.write_str("xml"),
            DocFormat::Html => f.write_str("html"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocError {
    #[error("malformed markup at line {line}, column {column}: {message}")]
    MalformedMarkup {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot decode input: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: String,
}

impl Attribute {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub name: String,
    pub attributes: Vec<Attribute>,
    pub children: Vec<MarkupNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkupNode {
    Element(Element),
    Text(String),
    /// Opaque; never translated.
    Comment(String),
    /// Opaque; content between `<?` and `?>`.
    ProcessingInstruction(String),
    /// Opaque; content between `<!` and `>`.
    Doctype(String),
}

/// Element shell without children, used to rebuild inline formatting.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagSnapshot {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl TagSnapshot {
    pub fn into_element(self, children: Vec<MarkupNode>) -> Element {
        Element {
            name: self.name,
            attributes: self.attributes,
            children,
        }
    }
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            attributes: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.push(Attribute::new(name, value));
        self
    }

    pub fn with_child(mut self, child: MarkupNode) -> Self {
        self.children.push(child);
        self
    }

    pub fn with_text(self, text: impl Into<String>) -> Self {
        self.with_child(MarkupNode::Text(text.into()))
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.value.as_str())
    }

    pub fn snapshot(&self) -> TagSnapshot {
        TagSnapshot {
            name: self.name.clone(),
            attributes: self.attributes.clone(),
        }
    }

    /// Concatenated text of all descendant text nodes.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        collect_text(&self.children, &mut out);
        out
    }
}

fn collect_text(nodes: &[MarkupNode], out: &mut String) {
    for node in nodes {
        match node {
            MarkupNode::Text(t) => out.push_str(t),
            MarkupNode::Element(e) => collect_text(&e.children, out),
            _ => {}
        }
    }
}

/// Child indices from the root element down to one node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, index: usize) -> Self {
        let mut steps = self.0.clone();
        steps.push(index);
        Self(steps)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        for (n, step) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str("/")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkupDocument {
    pub root: Element,
    pub format: DocFormat,
    pub declared_encoding: Option<String>,
    /// Opaque nodes before the root element (XML declaration, doctype, comments).
    pub prolog: Vec<MarkupNode>,
    /// Opaque nodes after the root element.
    pub epilog: Vec<MarkupNode>,
}

impl MarkupDocument {
    pub fn new(root: Element, format: DocFormat) -> Self {
        Self {
            root,
            format,
            declared_encoding: None,
            prolog: Vec::new(),
            epilog: Vec::new(),
        }
    }

    pub fn text_content(&self) -> String {
        self.root.text_content()
    }

    /// Resolves a path to an element. The empty path is the root.
    pub fn element_at(&self, path: &NodePath) -> Option<&Element> {
        let mut current = &self.root;
        for &step in &path.0 {
            match current.children.get(step)? {
                MarkupNode::Element(e) => current = e,
                _ => return None,
            }
        }
        Some(current)
    }

    pub fn element_at_mut(&mut self, path: &NodePath) -> Option<&mut Element> {
        let mut current = &mut self.root;
        for &step in &path.0 {
            match current.children.get_mut(step)? {
                MarkupNode::Element(e) => current = e,
                _ => return None,
            }
        }
        Some(current)
    }

    /// Resolves a non-root path to a node.
    pub fn node_at(&self, path: &NodePath) -> Option<&MarkupNode> {
        let (last, parent) = path.0.split_last()?;
        self.element_at(&NodePath(parent.to_vec()))?
            .children
            .get(*last)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

pub fn parse_document(bytes: &[u8], format: DocFormat) -> Result<MarkupDocument, DocError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let text = std::str::from_utf8(bytes).map_err(|e| {
        DocError::Decode(format!(
            "invalid UTF-8 at byte offset {}",
            e.valid_up_to()
        ))
    })?;
    Parser::new(text, format).parse()
}

pub fn parse_str(text: &str, format: DocFormat) -> Result<MarkupDocument, DocError> {
    parse_document(text.as_bytes(), format)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    format: DocFormat,
}

enum Item {
    Node(MarkupNode),
    Open(Element),
    Close(String),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, format: DocFormat) -> Self {
        Self {
            src,
            pos: 0,
            format,
        }
    }

    fn html(&self) -> bool {
        self.format == DocFormat::Html
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.rest().starts_with(s)
    }

    fn starts_with_ci(&self, s: &str) -> bool {
        self.rest()
            .get(..s.len())
            .is_some_and(|head| head.eq_ignore_ascii_case(s))
    }

    fn bump(&mut self, n: usize) {
        self.pos += n;
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> DocError {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = before[line_start..].chars().count() + 1;
        DocError::MalformedMarkup {
            line,
            column,
            message: message.into(),
        }
    }

    fn error(&self, message: impl Into<String>) -> DocError {
        self.error_at(self.pos, message)
    }

    fn skip_whitespace(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn parse(mut self) -> Result<MarkupDocument, DocError> {
        let mut prolog = Vec::new();
        let mut declared_encoding = None;
        loop {
            self.skip_whitespace();
            if self.rest().is_empty() {
                return Err(self.error("no root element"));
            }
            if self.starts_with("<?") {
                let content = self.read_delimited("<?", "?>")?;
                if let Some(enc) = xml_declaration_encoding(&content) {
                    let lower = enc.to_ascii_lowercase();
                    if lower != "utf-8" && lower != "utf8" {
                        return Err(DocError::Decode(format!(
                            "declared encoding {enc} is not supported (UTF-8 only)"
                        )));
                    }
                    declared_encoding = Some(enc);
                }
                prolog.push(MarkupNode::ProcessingInstruction(content));
            } else if self.starts_with("<!--") {
                let content = self.read_delimited("<!--", "-->")?;
                prolog.push(MarkupNode::Comment(content));
            } else if self.starts_with_ci("<!doctype") {
                let content = self.read_delimited("<!", ">")?;
                prolog.push(MarkupNode::Doctype(content));
            } else if self.starts_with("<") && !self.starts_with("</") {
                break;
            } else {
                return Err(self.error("expected root element"));
            }
        }

        let root = self.parse_root()?;

        let mut epilog = Vec::new();
        loop {
            self.skip_whitespace();
            if self.rest().is_empty() {
                break;
            }
            if self.starts_with("<!--") {
                let content = self.read_delimited("<!--", "-->")?;
                epilog.push(MarkupNode::Comment(content));
            } else if self.starts_with("<?") {
                let content = self.read_delimited("<?", "?>")?;
                epilog.push(MarkupNode::ProcessingInstruction(content));
            } else if self.starts_with("<") && !self.starts_with("</") {
                return Err(self.error("multiple root elements"));
            } else if self.starts_with("</") && self.html() {
                // stray end tag after the root
                self.read_end_tag()?;
            } else {
                return Err(self.error("content after root element"));
            }
        }

        Ok(MarkupDocument {
            root,
            format: self.format,
            declared_encoding,
            prolog,
            epilog,
        })
    }

    fn read_delimited(&mut self, open: &str, close: &str) -> Result<String, DocError> {
        let start = self.pos;
        self.bump(open.len());
        match self.rest().find(close) {
            Some(end) => {
                let content = self.rest()[..end].to_string();
                self.bump(end + close.len());
                Ok(content)
            }
            None => Err(self.error_at(start, format!("unterminated `{open}`"))),
        }
    }

    fn parse_root(&mut self) -> Result<Element, DocError> {
        let mut stack: Vec<(Element, usize)> = Vec::new();
        loop {
            if self.rest().is_empty() {
                if let Some((top, open_pos)) = stack.last() {
                    if !self.html() {
                        return Err(self.error_at(
                            *open_pos,
                            format!("element <{}> is never closed", top.name),
                        ));
                    }
                    // close everything that is still open
                    while stack.len() > 1 {
                        let (el, _) = stack.pop().unwrap();
                        push_child(&mut stack.last_mut().unwrap().0, MarkupNode::Element(el));
                    }
                    return Ok(stack.pop().unwrap().0);
                }
                return Err(self.error("no root element"));
            }

            let item_pos = self.pos;
            let item = self.next_item(stack.last().map(|(e, _)| e.name.as_str()))?;
            match item {
                Item::Node(node) => match stack.last_mut() {
                    Some((parent, _)) => push_child(parent, node),
                    None => return Err(self.error_at(item_pos, "content outside root element")),
                },
                Item::Open(el) => {
                    if self.html() {
                        self.html_autoclose(&mut stack, &el.name);
                    }
                    let is_void = self.html() && VOID_ELEMENTS.contains(&el.name.as_str());
                    let self_closed = self.src[..self.pos].ends_with("/>");
                    if is_void || self_closed {
                        match stack.last_mut() {
                            Some((parent, _)) => push_child(parent, MarkupNode::Element(el)),
                            None => return Ok(el),
                        }
                    } else if self.html() && RAW_TEXT_ELEMENTS.contains(&el.name.as_str()) {
                        let mut el = el;
                        let close = format!("</{}", el.name);
                        let rest = self.rest();
                        let end = find_ci(rest, &close).unwrap_or(rest.len());
                        if end > 0 {
                            el.children.push(MarkupNode::Text(rest[..end].to_string()));
                        }
                        self.bump(end);
                        if !self.rest().is_empty() {
                            self.read_end_tag()?;
                        }
                        match stack.last_mut() {
                            Some((parent, _)) => push_child(parent, MarkupNode::Element(el)),
                            None => return Ok(el),
                        }
                    } else {
                        stack.push((el, item_pos));
                    }
                }
                Item::Close(name) => {
                    if self.html() {
                        if VOID_ELEMENTS.contains(&name.as_str()) {
                            continue;
                        }
                        let Some(depth) = stack.iter().rposition(|(e, _)| e.name == name) else {
                            continue;
                        };
                        while stack.len() > depth + 1 {
                            let (el, _) = stack.pop().unwrap();
                            push_child(&mut stack.last_mut().unwrap().0, MarkupNode::Element(el));
                        }
                    } else {
                        match stack.last() {
                            Some((top, _)) if top.name == name => {}
                            Some((top, _)) => {
                                return Err(self.error_at(
                                    item_pos,
                                    format!("expected </{}>, found </{}>", top.name, name),
                                ))
                            }
                            None => {
                                return Err(self.error_at(item_pos, format!("unexpected </{name}>")))
                            }
                        }
                    }
                    let (el, _) = stack.pop().unwrap();
                    match stack.last_mut() {
                        Some((parent, _)) => push_child(parent, MarkupNode::Element(el)),
                        None => return Ok(el),
                    }
                }
            }
        }
    }

    fn html_autoclose(&self, stack: &mut Vec<(Element, usize)>, opening: &str) {
        let close_top = |stack: &mut Vec<(Element, usize)>| {
            let (el, _) = stack.pop().unwrap();
            push_child(&mut stack.last_mut().unwrap().0, MarkupNode::Element(el));
        };
        if opening == "li" {
            let list = stack
                .iter()
                .rposition(|(e, _)| e.name == "ul" || e.name == "ol");
            let li = stack.iter().rposition(|(e, _)| e.name == "li");
            if let Some(li) = li {
                if li > 0 && list.is_none_or(|l| li > l) {
                    while stack.len() > li {
                        close_top(stack);
                    }
                }
            }
        }
        if CLOSES_PARAGRAPH.contains(&opening) {
            if let Some((top, _)) = stack.last() {
                if top.name == "p" && stack.len() > 1 {
                    close_top(stack);
                }
            }
        }
    }

    fn next_item(&mut self, parent: Option<&str>) -> Result<Item, DocError> {
        let _ = parent;
        if self.starts_with("<!--") {
            return Ok(Item::Node(MarkupNode::Comment(
                self.read_delimited("<!--", "-->")?,
            )));
        }
        if self.starts_with("<![CDATA[") {
            return Ok(Item::Node(MarkupNode::Text(
                self.read_delimited("<![CDATA[", "]]>")?,
            )));
        }
        if self.starts_with("<?") {
            return Ok(Item::Node(MarkupNode::ProcessingInstruction(
                self.read_delimited("<?", "?>")?,
            )));
        }
        if self.starts_with("<!") {
            if self.html() {
                return Ok(Item::Node(MarkupNode::Doctype(
                    self.read_delimited("<!", ">")?,
                )));
            }
            return Err(self.error("unexpected markup declaration"));
        }
        if self.starts_with("</") {
            return Ok(Item::Close(self.read_end_tag()?));
        }
        if self.starts_with("<") {
            let next = self.rest()[1..].chars().next();
            if next.is_some_and(is_name_start) {
                return Ok(Item::Open(self.read_start_tag()?));
            }
            if !self.html() {
                return Err(self.error("`<` must start a tag"));
            }
            // lenient: a lone `<` is text
            self.bump(1);
            let mut text = String::from("<");
            text.push_str(&self.read_text()?);
            return Ok(Item::Node(MarkupNode::Text(text)));
        }
        Ok(Item::Node(MarkupNode::Text(self.read_text()?)))
    }

    fn read_text(&mut self) -> Result<String, DocError> {
        let end = self.rest().find('<').unwrap_or(self.rest().len());
        let start = self.pos;
        let raw = &self.rest()[..end];
        self.bump(end);
        self.decode_entities(raw, start)
    }

    fn read_name(&mut self) -> Result<String, DocError> {
        let rest = self.rest();
        let len = rest
            .char_indices()
            .find(|&(_, c)| !is_name_char(c))
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 || !rest.chars().next().is_some_and(is_name_start) {
            return Err(self.error("expected a name"));
        }
        let name = &rest[..len];
        self.bump(len);
        Ok(if self.html() {
            name.to_ascii_lowercase()
        } else {
            name.to_string()
        })
    }

    fn read_end_tag(&mut self) -> Result<String, DocError> {
        self.bump(2);
        let name = self.read_name()?;
        self.skip_whitespace();
        if !self.starts_with(">") {
            return Err(self.error(format!("expected `>` to close </{name}")));
        }
        self.bump(1);
        Ok(name)
    }

    fn read_start_tag(&mut self) -> Result<Element, DocError> {
        self.bump(1);
        let mut el = Element::new(self.read_name()?);
        loop {
            let had_space = self.peek().is_some_and(char::is_whitespace);
            self.skip_whitespace();
            if self.starts_with("/>") {
                self.bump(2);
                return Ok(el);
            }
            if self.starts_with(">") {
                self.bump(1);
                return Ok(el);
            }
            if self.rest().is_empty() {
                return Err(self.error(format!("unterminated start tag <{}>", el.name)));
            }
            if !had_space {
                return Err(self.error("expected whitespace before attribute"));
            }
            let attr_pos = self.pos;
            let name = self.read_name()?;
            self.skip_whitespace();
            let value = if self.starts_with("=") {
                self.bump(1);
                self.skip_whitespace();
                self.read_attr_value()?
            } else if self.html() {
                String::new()
            } else {
                return Err(self.error(format!("attribute `{name}` has no value")));
            };
            if el.attributes.iter().any(|a| a.name == name) {
                if self.html() {
                    continue;
                }
                return Err(self.error_at(attr_pos, format!("duplicate attribute `{name}`")));
            }
            el.attributes.push(Attribute { name, value });
        }
    }

    fn read_attr_value(&mut self) -> Result<String, DocError> {
        let quote = self.peek();
        match quote {
            Some(q @ ('"' | '\'')) => {
                self.bump(1);
                let start = self.pos;
                let Some(end) = self.rest().find(q) else {
                    return Err(self.error("unterminated attribute value"));
                };
                let raw = &self.rest()[..end];
                if !self.html() && raw.contains('<') {
                    return Err(self.error("`<` in attribute value"));
                }
                self.bump(end + 1);
                self.decode_entities(raw, start)
            }
            _ if self.html() => {
                let rest = self.rest();
                let end = rest
                    .char_indices()
                    .find(|&(_, c)| c.is_whitespace() || c == '>')
                    .map_or(rest.len(), |(i, _)| i);
                let start = self.pos;
                let raw = &rest[..end];
                self.bump(end);
                self.decode_entities(raw, start)
            }
            _ => Err(self.error("attribute value must be quoted")),
        }
    }

    fn decode_entities(&self, raw: &str, offset: usize) -> Result<String, DocError> {
        if !raw.contains('&') {
            return Ok(raw.to_string());
        }
        let mut out = String::with_capacity(raw.len());
        let mut rest = raw;
        while let Some(amp) = rest.find('&') {
            out.push_str(&rest[..amp]);
            let after = &rest[amp + 1..];
            let decoded = after
                .find(';')
                .filter(|&semi| semi > 0 && semi <= 32)
                .and_then(|semi| decode_entity(&after[..semi], self.html()).map(|c| (c, semi)));
            match decoded {
                Some((c, semi)) => {
                    out.push(c);
                    rest = &after[semi + 1..];
                }
                None if self.html() => {
                    out.push('&');
                    rest = after;
                }
                None => {
                    let at = offset + (raw.len() - rest.len()) + amp;
                    return Err(self.error_at(at, "unknown or malformed entity reference"));
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn push_child(parent: &mut Element, node: MarkupNode) {
    if let MarkupNode::Text(text) = &node {
        if text.is_empty() {
            return;
        }
        if let Some(MarkupNode::Text(prev)) = parent.children.last_mut() {
            prev.push_str(text);
            return;
        }
    }
    parent.children.push(node);
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let lower = haystack.to_ascii_lowercase();
    lower.find(&needle.to_ascii_lowercase())
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == ':'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | ':' | '-' | '.')
}

fn decode_entity(name: &str, html: bool) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    let c = match name {
        "lt" => '<',
        "gt" => '>',
        "amp" => '&',
        "quot" => '"',
        "apos" => '\'',
        _ if !html => return None,
        "nbsp" => '\u{a0}',
        "ndash" => '\u{2013}',
        "mdash" => '\u{2014}',
        "hellip" => '\u{2026}',
        "bdquo" => '\u{201e}',
        "ldquo" => '\u{201c}',
        "rdquo" => '\u{201d}',
        "lsquo" => '\u{2018}',
        "rsquo" => '\u{2019}',
        "laquo" => '\u{ab}',
        "raquo" => '\u{bb}',
        "copy" => '\u{a9}',
        "deg" => '\u{b0}',
        "times" => '\u{d7}',
        "minus" => '\u{2212}',
        "middot" => '\u{b7}',
        "shy" => '\u{ad}',
        _ => return None,
    };
    Some(c)
}

fn xml_declaration_encoding(pi: &str) -> Option<String> {
    let body = pi.strip_prefix("xml")?;
    if !body.starts_with(char::is_whitespace) {
        return None;
    }
    let at = body.find("encoding")?;
    let after = body[at + "encoding".len()..].trim_start().strip_prefix('=')?;
    let after = after.trim_start();
    let quote = after.chars().next().filter(|c| *c == '"' || *c == '\'')?;
    let value = &after[1..];
    let end = value.find(quote)?;
    Some(value[..end].to_string())
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

pub fn serialize_document(doc: &MarkupDocument) -> Vec<u8> {
    serialize_to_string(doc).into_bytes()
}

pub fn serialize_to_string(doc: &MarkupDocument) -> String {
    let mut out = String::new();
    for node in &doc.prolog {
        write_node(node, doc.format, false, &mut out);
        out.push('\n');
    }
    write_element(&doc.root, doc.format, &mut out);
    for node in &doc.epilog {
        out.push('\n');
        write_node(node, doc.format, false, &mut out);
    }
    out
}

/// Serializes a single element subtree.
pub fn serialize_element(el: &Element, format: DocFormat) -> String {
    let mut out = String::new();
    write_element(el, format, &mut out);
    out
}

fn write_node(node: &MarkupNode, format: DocFormat, raw_text: bool, out: &mut String) {
    match node {
        MarkupNode::Element(el) => write_element(el, format, out),
        MarkupNode::Text(text) if raw_text => out.push_str(text),
        MarkupNode::Text(text) => escape_into(text, false, out),
        MarkupNode::Comment(c) => {
            out.push_str("<!--");
            out.push_str(c);
            out.push_str("-->");
        }
        MarkupNode::ProcessingInstruction(p) => {
            out.push_str("<?");
            out.push_str(p);
            out.push_str("?>");
        }
        MarkupNode::Doctype(d) => {
            out.push_str("<!");
            out.push_str(d);
            out.push('>');
        }
    }
}

fn write_element(el: &Element, format: DocFormat, out: &mut String) {
    out.push('<');
    out.push_str(&el.name);
    for attr in &el.attributes {
        out.push(' ');
        out.push_str(&attr.name);
        out.push_str("=\"");
        escape_into(&attr.value, true, out);
        out.push('"');
    }
    let self_close = el.children.is_empty()
        && match format {
            DocFormat::Xml => true,
            DocFormat::Html => VOID_ELEMENTS.contains(&el.name.as_str()),
        };
    if self_close {
        out.push_str("/>");
        return;
    }
    out.push('>');
    let raw = format == DocFormat::Html && RAW_TEXT_ELEMENTS.contains(&el.name.as_str());
    for child in &el.children {
        write_node(child, format, raw, out);
    }
    out.push_str("</");
    out.push_str(&el.name);
    out.push('>');
}

fn escape_into(text: &str, attribute: bool, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical form
// ---------------------------------------------------------------------------

/// Merges adjacent text nodes and drops empty ones. Idempotent.
pub fn canonicalize(doc: &MarkupDocument) -> MarkupDocument {
    let mut out = doc.clone();
    canonicalize_element(&mut out.root);
    out
}

fn canonicalize_element(el: &mut Element) {
    let children = std::mem::take(&mut el.children);
    for mut child in children {
        if let MarkupNode::Element(inner) = &mut child {
            canonicalize_element(inner);
        }
        push_child(el, child);
    }
}

/// True when no element has two adjacent text children or an empty text child.
pub fn is_canonical(el: &Element) -> bool {
    let mut prev_text = false;
    for child in &el.children {
        match child {
            MarkupNode::Text(t) => {
                if prev_text || t.is_empty() {
                    return false;
                }
                prev_text = true;
            }
            MarkupNode::Element(inner) => {
                if !is_canonical(inner) {
                    return false;
                }
                prev_text = false;
            }
            _ => prev_text = false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xml(s: &str) -> MarkupDocument {
        parse_str(s, DocFormat::Xml).unwrap()
    }

    fn html(s: &str) -> MarkupDocument {
        parse_str(s, DocFormat::Html).unwrap()
    }

    #[test]
    fn minimal_document() {
        let doc = xml("<p>hi</p>");
        assert_eq!(doc.root, Element::new("p").with_text("hi"));
    }

    #[test]
    fn nested_structure() {
        let doc = xml("<p><b>a</b>b</p>");
        let expected = Element::new("p")
            .with_child(MarkupNode::Element(Element::new("b").with_text("a")))
            .with_text("b");
        assert_eq!(doc.root, expected);
    }

    #[test]
    fn html_void_element_is_closed() {
        let doc = html("<p>a<br>b</p>");
        let expected = Element::new("p")
            .with_text("a")
            .with_child(MarkupNode::Element(Element::new("br")))
            .with_text("b");
        assert_eq!(doc.root, expected);
    }

    #[test]
    fn html_closes_open_paragraphs_and_list_items() {
        let doc = html("<div><p>one<p>two<ul><li>a<li>b</ul></div>");
        assert_eq!(
            serialize_to_string(&doc),
            "<div><p>one</p><p>two</p><ul><li>a</li><li>b</li></ul></div>"
        );
    }

    #[test]
    fn html_is_case_insensitive_and_accepts_bare_attributes() {
        let doc = html("<DIV Class=x><INPUT type=checkbox checked></DIV>");
        assert_eq!(
            serialize_to_string(&doc),
            r#"<div class="x"><input type="checkbox" checked=""/></div>"#
        );
    }

    #[test]
    fn xml_rejects_mismatched_tags_with_position() {
        let err = parse_str("<p>\n  <b>x</i></p>", DocFormat::Xml).unwrap_err();
        match err {
            DocError::MalformedMarkup { line, column, .. } => {
                assert_eq!((line, column), (2, 7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn xml_rejects_unclosed_and_multiple_roots() {
        assert!(parse_str("<p><b>x</p>", DocFormat::Xml).is_err());
        assert!(parse_str("<p>x", DocFormat::Xml).is_err());
        assert!(parse_str("<p/><p/>", DocFormat::Xml).is_err());
        assert!(parse_str("text", DocFormat::Xml).is_err());
        assert!(parse_str("<p>a & b</p>", DocFormat::Xml).is_err());
    }

    #[test]
    fn invalid_utf8_is_a_decode_error() {
        let err = parse_document(b"<p>\xff</p>", DocFormat::Xml).unwrap_err();
        assert!(matches!(err, DocError::Decode(_)));
    }

    #[test]
    fn only_utf8_declarations_are_accepted() {
        let doc = xml("<?xml version=\"1.0\" encoding=\"UTF-8\"?><p/>");
        assert_eq!(doc.declared_encoding.as_deref(), Some("UTF-8"));
        let err = parse_str("<?xml version=\"1.0\" encoding=\"windows-1250\"?><p/>", DocFormat::Xml)
            .unwrap_err();
        assert!(matches!(err, DocError::Decode(_)));
    }

    #[test]
    fn escaping_is_canonical() {
        let doc = MarkupDocument::new(
            Element::new("p").with_attr("title", "\"q\" & <x>").with_text("a<b"),
            DocFormat::Xml,
        );
        let out = serialize_to_string(&doc);
        assert_eq!(out, r#"<p title="&quot;q&quot; &amp; &lt;x&gt;">a&lt;b</p>"#);
        assert_eq!(xml(&out), doc);
    }

    #[test]
    fn round_trip_preserves_prolog_comments_and_attribute_order() {
        let src = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!-- top -->\n<ex z=\"1\" a=\"2\"><!-- c --><q>Ahoj&#x21;</q></ex>";
        let doc = xml(src);
        let out = serialize_to_string(&doc);
        assert_eq!(
            out,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!-- top -->\n<ex z=\"1\" a=\"2\"><!-- c --><q>Ahoj!</q></ex>"
        );
        assert_eq!(xml(&out), doc);
    }

    #[test]
    fn void_elements_serialize_self_closed_in_html() {
        let doc = html("<p>a<br>b<b></b></p>");
        let out = serialize_to_string(&doc);
        assert_eq!(out, "<p>a<br/>b<b></b></p>");
        assert_eq!(html(&out), doc);
    }

    #[test]
    fn html_script_content_is_raw() {
        let doc = html("<div><script>if (a < b) { x(); }</script>ok</div>");
        let out = serialize_to_string(&doc);
        assert_eq!(out, "<div><script>if (a < b) { x(); }</script>ok</div>");
        assert_eq!(html(&out), doc);
    }

    #[test]
    fn cdata_becomes_text() {
        let doc = xml("<p>a<![CDATA[<b>]]>c</p>");
        assert_eq!(doc.root, Element::new("p").with_text("a<b>c"));
    }

    #[test]
    fn canonicalize_merges_adjacent_text() {
        let doc = MarkupDocument::new(
            Element::new("p")
                .with_text("a")
                .with_text("b")
                .with_text(""),
            DocFormat::Xml,
        );
        let canon = canonicalize(&doc);
        assert_eq!(canon.root, Element::new("p").with_text("ab"));
        assert_eq!(canonicalize(&canon), canon);
        assert!(is_canonical(&canon.root));
    }

    #[test]
    fn paths_resolve() {
        let doc = xml("<a><b/><c><d/></c></a>");
        assert_eq!(doc.element_at(&NodePath(vec![1, 0])).unwrap().name, "d");
        assert!(doc.element_at(&NodePath(vec![5])).is_none());
        assert_eq!(NodePath(vec![1, 0]).to_string(), "/1/0");
    }
}
