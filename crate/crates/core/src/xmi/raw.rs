//! Owned, text-free XML element tree built on quick-xml.

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};

use super::XmiError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub root: RawElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawElement {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    pub children: Vec<RawElement>,
    /// Byte offset of the start tag.
    pub position: u64,
}

impl RawElement {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn require_attr(&self, name: &str) -> Result<&str, XmiError> {
        self.attr(name).ok_or_else(|| XmiError::dialect(&self.name, format!("missing attribute `{name}`")))
    }
}

/// Parses a UTF-8 document into its element tree. Character data other than
/// whitespace is rejected; comments, processing instructions and the XML
/// declaration are skipped.
pub fn parse_document(bytes: &[u8]) -> Result<RawDocument, XmiError> {
    let text = std::str::from_utf8(bytes).map_err(|e| XmiError::MalformedXml {
        position: e.valid_up_to() as u64,
        message: "document is not valid UTF-8".to_owned(),
    })?;
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<RawElement> = Vec::new();
    let mut root: Option<RawElement> = None;

    loop {
        let position = reader.buffer_position();
        let event = reader.read_event().map_err(|e| XmiError::MalformedXml {
            position: reader.error_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(start) => stack.push(element(&start, position)?),
            Event::Empty(start) => {
                let elem = element(&start, position)?;
                attach(&mut stack, &mut root, elem, position)?;
            }
            Event::End(_) => {
                let elem = stack.pop().ok_or_else(|| XmiError::MalformedXml {
                    position,
                    message: "unexpected end tag".to_owned(),
                })?;
                attach(&mut stack, &mut root, elem, position)?;
            }
            Event::Text(t) => {
                if !t.into_inner().bytes().all(|b| b.is_ascii_whitespace()) {
                    return Err(unexpected_text(&stack, position));
                }
            }
            Event::CData(_) | Event::GeneralRef(_) => return Err(unexpected_text(&stack, position)),
            Event::Comment(_) | Event::Decl(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Eof => break,
        }
    }

    if !stack.is_empty() {
        return Err(XmiError::MalformedXml {
            position: reader.buffer_position(),
            message: format!("unclosed element `{}`", stack[stack.len() - 1].name),
        });
    }
    let root = root.ok_or_else(|| XmiError::MalformedXml { position: 0, message: "no root element".to_owned() })?;
    Ok(RawDocument { root })
}

fn element(start: &BytesStart<'_>, position: u64) -> Result<RawElement, XmiError> {
    let malformed = |message: String| XmiError::MalformedXml { position, message };
    let name = start.name().into_inner().to_owned();
    let mut attributes = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| malformed(e.to_string()))?;
        let key = attr.key.into_inner().to_owned();
        let value = attr.normalized_value(XmlVersion::Implicit1_0).map_err(|e| malformed(e.to_string()))?;
        attributes.push((key, value.into_owned()));
    }
    Ok(RawElement { name, attributes, children: Vec::new(), position })
}

fn attach(
    stack: &mut [RawElement],
    root: &mut Option<RawElement>,
    elem: RawElement,
    position: u64,
) -> Result<(), XmiError> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(elem),
        None if root.is_none() => *root = Some(elem),
        None => {
            return Err(XmiError::MalformedXml { position, message: "more than one root element".to_owned() })
        }
    }
    Ok(())
}

fn unexpected_text(stack: &[RawElement], position: u64) -> XmiError {
    match stack.last() {
        Some(parent) => XmiError::dialect(&parent.name, "character content is not allowed"),
        None => XmiError::MalformedXml { position, message: "text outside the root element".to_owned() },
    }
}

/// Escapes an attribute value so that it survives attribute-value
/// normalization: whitespace control characters become character references.
pub(crate) fn escape_attr(value: &str) -> std::borrow::Cow<'_, str> {
    if !value.contains(['&', '<', '>', '"', '\'', '\n', '\r', '\t']) {
        return value.into();
    }
    let mut out = String::with_capacity(value.len() + 8);
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out.into()
}

/// Minimal pretty printer: two-space indentation, self-closing empty elements.
pub(crate) struct XmlWriter {
    out: String,
}

impl XmlWriter {
    pub fn new() -> Self {
        XmlWriter { out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n") }
    }

    fn start_tag(&mut self, depth: usize, name: &str, attributes: &[(&str, &str)]) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (key, value) in attributes {
            self.out.push(' ');
            self.out.push_str(key);
            self.out.push_str("=\"");
            self.out.push_str(&escape_attr(value));
            self.out.push('"');
        }
    }

    pub fn empty(&mut self, depth: usize, name: &str, attributes: &[(&str, &str)]) {
        self.start_tag(depth, name, attributes);
        self.out.push_str("/>\n");
    }

    pub fn open(&mut self, depth: usize, name: &str, attributes: &[(&str, &str)]) {
        self.start_tag(depth, name, attributes);
        self.out.push_str(">\n");
    }

    pub fn close(&mut self, depth: usize, name: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push_str(">\n");
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_nested_tree() {
        let doc = parse_document(
            br#"<?xml version="1.0" encoding="UTF-8"?>
<!-- leading comment -->
<a x="1"><b y="&lt;2&gt;"/><c>
  <d/>
</c></a>"#,
        )
        .unwrap();
        assert_eq!(doc.root.name, "a");
        assert_eq!(doc.root.attr("x"), Some("1"));
        assert_eq!(doc.root.children[0].attr("y"), Some("<2>"));
        assert_eq!(doc.root.children[1].children[0].name, "d");
    }

    #[test]
    fn rejects_text_content() {
        let err = parse_document(b"<a>hello</a>").unwrap_err();
        assert!(matches!(err, XmiError::DialectViolation { .. }), "{err:?}");
    }

    #[test]
    fn malformed_documents() {
        for bad in [&b"<a><b></a>"[..], b"<a>", b"", b"<a/><b/>", b"<a x='1' x='2'/>", b"\xff\xfe"] {
            let err = parse_document(bad).unwrap_err();
            assert!(matches!(err, XmiError::MalformedXml { .. }), "{:?} -> {err:?}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn escaped_values_survive_normalization() {
        let value = "line1\nline2\t\"quoted\" & <tag> 'x' \r";
        let doc = format!("<a v=\"{}\"/>", escape_attr(value));
        let parsed = parse_document(doc.as_bytes()).unwrap();
        assert_eq!(parsed.root.attr("v"), Some(value));
    }
}
