//! Importer for TEI XML exports carrying `coords` attributes.
//!
//! Recognized structure: `teiHeader//titleStmt/title` for the document title,
//! `facsimile/surface` for page sizes, `body//head` for sections,
//! `body//p/s[@coords]` for sentences with `ref[@type="bibr"]` markers, and
//! `back//listBibl/biblStruct` for the bibliography. Coordinates are
//! `page,x,y,w,h` groups separated by `;` with 1-based pages.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use sha2::{Digest, Sha256};

use super::{
    current_year, BibEntry, DocError, InlineCitationMarker, Page, ParsedDocument, SectionHeader,
    SentenceSpan,
};
use crate::geometry::Rect;

const DEFAULT_PAGE: (f64, f64) = (612.0, 792.0);

#[derive(Default)]
struct SentenceBuf {
    page: u32,
    boxes: Vec<Rect>,
    text: String,
    markers: Vec<(usize, Option<String>)>,
    closed: Vec<(std::ops::Range<usize>, Option<String>)>,
}

#[derive(Default)]
struct BibBuf {
    key: String,
    analytic_title: Option<String>,
    monogr_title: Option<String>,
    year: Option<i32>,
    raw_reference: Option<String>,
    all_text: Vec<String>,
}

#[derive(Default)]
struct Importer {
    stack: Vec<String>,
    title: Option<String>,
    idno_md5: Option<String>,
    pages: Vec<Page>,
    sections: Vec<SectionHeader>,
    sentences: Vec<SentenceSpan>,
    markers: Vec<InlineCitationMarker>,
    bib: Vec<BibEntry>,

    text_buf: Option<String>,
    head_page: Option<u32>,
    head_depth: u32,
    sentence: Option<SentenceBuf>,
    biblio: Option<BibBuf>,
}

pub fn import_tei(raw: &[u8]) -> Result<ParsedDocument, DocError> {
    let mut reader = Reader::from_reader(raw);
    reader.config_mut().trim_text(false);
    let mut imp = Importer::default();
    let mut buf = Vec::new();
    let mut saw_root = false;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| DocError::schema(format!("xml@{}", reader.buffer_position()), e.to_string()))?;
        match ev {
            Event::Start(e) => {
                let name = local(&e);
                if imp.stack.is_empty() {
                    if name != "TEI" {
                        return Err(DocError::schema("<root>", format!("expected <TEI>, found <{name}>")));
                    }
                    saw_root = true;
                }
                imp.start(&name, &e)?;
                imp.stack.push(name);
            }
            Event::Empty(e) => {
                let name = local(&e);
                imp.start(&name, &e)?;
                imp.stack.push(name.clone());
                imp.end(&name)?;
                imp.stack.pop();
            }
            Event::End(_) => {
                let name = imp.stack.pop().unwrap_or_default();
                imp.end(&name)?;
            }
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| DocError::schema(imp.path(), e.to_string()))?;
                imp.text(&text);
            }
            Event::CData(t) => imp.text(&String::from_utf8_lossy(&t)),
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !saw_root {
        return Err(DocError::schema("<root>", "missing <TEI> element"));
    }
    imp.finish(raw)
}

fn local(e: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(e.local_name().as_ref()).into_owned()
}

fn attr(e: &BytesStart<'_>, key: &str) -> Option<String> {
    e.attributes()
        .flatten()
        .find(|a| a.key.as_ref() == key.as_bytes() || a.key.local_name().as_ref() == key.as_bytes())
        .and_then(|a| a.unescape_value().ok().map(|v| v.into_owned()))
}

fn parse_coords(path: &str, coords: &str) -> Result<Vec<(u32, Rect)>, DocError> {
    coords
        .split(';')
        .filter(|g| !g.trim().is_empty())
        .map(|g| {
            let v: Vec<f64> = g
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| DocError::schema(format!("{path}@coords"), format!("bad number in `{g}`")))?;
            match v.as_slice() {
                [p, x, y, w, h] if *p >= 1.0 => Ok((*p as u32 - 1, Rect::new(*x, *y, *w, *h))),
                _ => Err(DocError::schema(format!("{path}@coords"), format!("expected page,x,y,w,h in `{g}`"))),
            }
        })
        .collect()
}

/// Appends `chunk` with runs of whitespace collapsed to one space and no
/// leading whitespace.
fn push_collapsed(out: &mut String, chunk: &str) {
    for c in chunk.chars() {
        if c.is_whitespace() {
            if !out.is_empty() && !out.ends_with(' ') {
                out.push(' ');
            }
        } else {
            out.push(c);
        }
    }
}

impl Importer {
    fn path(&self) -> String {
        self.stack.join("/")
    }

    fn within(&self, name: &str) -> bool {
        self.stack.iter().any(|s| s == name)
    }

    fn start(&mut self, name: &str, e: &BytesStart<'_>) -> Result<(), DocError> {
        match name {
            "title" if self.title.is_none() && self.within("titleStmt") => {
                self.text_buf = Some(String::new());
            }
            "idno" if self.within("teiHeader") => {
                if attr(e, "type").as_deref() == Some("MD5") {
                    self.text_buf = Some(String::new());
                }
            }
            "surface" if self.within("facsimile") => {
                let num = |k| attr(e, k).and_then(|v| v.parse::<f64>().ok());
                let (w, h) = match (num("ulx"), num("uly"), num("lrx"), num("lry")) {
                    (Some(ulx), Some(uly), Some(lrx), Some(lry)) => (lrx - ulx, lry - uly),
                    _ => DEFAULT_PAGE,
                };
                let index = self.pages.len() as u32;
                self.pages.push(Page { index, width: w, height: h });
            }
            "head" if self.within("body") && !self.within("figure") => {
                let path = self.path();
                self.head_page = attr(e, "coords")
                    .map(|c| parse_coords(&path, &c))
                    .transpose()?
                    .and_then(|v| v.first().map(|(p, _)| *p));
                self.head_depth = attr(e, "n")
                    .map(|n| n.trim_end_matches('.').split('.').count() as u32)
                    .unwrap_or(1)
                    .max(1);
                self.text_buf = Some(String::new());
            }
            "s" if self.within("body") && self.within("p") && !self.within("note") => {
                let mut sb = SentenceBuf::default();
                if let Some(c) = attr(e, "coords") {
                    let boxes = parse_coords(&self.path(), &c)?;
                    if let Some((first, _)) = boxes.first() {
                        sb.page = *first;
                        sb.boxes = boxes
                            .iter()
                            .filter(|(p, r)| p == first && r.is_proper())
                            .map(|(_, r)| *r)
                            .collect();
                    }
                }
                self.sentence = Some(sb);
            }
            "ref" if self.sentence.is_some() && attr(e, "type").as_deref() == Some("bibr") => {
                let target = attr(e, "target").map(|t| t.trim_start_matches('#').to_string());
                if let Some(s) = self.sentence.as_mut() {
                    s.markers.push((s.text.chars().count(), target));
                }
            }
            "biblStruct" if self.within("listBibl") => {
                let key = attr(e, "id").unwrap_or_else(|| format!("b{}", self.bib.len()));
                self.biblio = Some(BibBuf { key, ..Default::default() });
            }
            "title" if self.biblio.is_some() => self.text_buf = Some(String::new()),
            "note" if self.biblio.is_some() && attr(e, "type").as_deref() == Some("raw_reference") => {
                self.text_buf = Some(String::new());
            }
            "date" if self.biblio.is_some() => {
                let year = attr(e, "when").and_then(|w| w.get(..4).and_then(|y| y.parse::<i32>().ok()));
                if let (Some(b), Some(y)) = (self.biblio.as_mut(), year) {
                    if b.year.is_none() && (1500..=current_year() + 1).contains(&y) {
                        b.year = Some(y);
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn text(&mut self, text: &str) {
        if let Some(buf) = self.text_buf.as_mut() {
            push_collapsed(buf, text);
        }
        if let Some(s) = self.sentence.as_mut() {
            push_collapsed(&mut s.text, text);
        }
        if let Some(b) = self.biblio.as_mut() {
            let t = text.trim();
            if !t.is_empty() {
                b.all_text.push(t.to_string());
            }
        }
    }

    fn take_text(&mut self) -> Option<String> {
        self.text_buf.take().map(|t| t.trim().to_string()).filter(|t| !t.is_empty())
    }

    fn end(&mut self, name: &str) -> Result<(), DocError> {
        match name {
            "title" if self.biblio.is_some() => {
                let t = self.take_text();
                let in_analytic = self.within("analytic");
                if let Some(b) = self.biblio.as_mut() {
                    if in_analytic {
                        b.analytic_title = b.analytic_title.take().or(t);
                    } else {
                        b.monogr_title = b.monogr_title.take().or(t);
                    }
                }
            }
            "title" if self.text_buf.is_some() => self.title = self.take_text(),
            "idno" if self.text_buf.is_some() => self.idno_md5 = self.take_text(),
            "head" if self.text_buf.is_some() => {
                let text = self.take_text().unwrap_or_default();
                if !text.is_empty() {
                    let page = self
                        .head_page
                        .or_else(|| self.sentences.last().map(|s| s.page))
                        .unwrap_or(0);
                    self.sections.push(SectionHeader {
                        index: self.sections.len() as u32,
                        page,
                        text,
                        depth: self.head_depth,
                    });
                }
            }
            "note" if self.text_buf.is_some() && self.biblio.is_some() => {
                let t = self.take_text();
                if let Some(b) = self.biblio.as_mut() {
                    b.raw_reference = t;
                }
            }
            "ref" => {
                if let Some(s) = self.sentence.as_mut() {
                    if let Some((start, target)) = s.markers.pop() {
                        let chars: Vec<char> = s.text.chars().collect();
                        let (mut a, mut b) = (start, chars.len());
                        while a < b && chars[a].is_whitespace() {
                            a += 1;
                        }
                        while b > a && chars[b - 1].is_whitespace() {
                            b -= 1;
                        }
                        if a < b {
                            s.closed.push((a..b, target));
                        }
                    }
                }
            }
            "s" => {
                if let Some(sb) = self.sentence.take() {
                    self.push_sentence(sb);
                }
            }
            "biblStruct" => {
                if let Some(b) = self.biblio.take() {
                    let title = b.analytic_title.or(b.monogr_title);
                    let raw_text = b.raw_reference.unwrap_or_else(|| b.all_text.join(" "));
                    self.bib.push(BibEntry {
                        bib_key: b.key,
                        label: None,
                        raw_text,
                        title,
                        year: b.year,
                        resolved_paper_id: None,
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn push_sentence(&mut self, sb: SentenceBuf) {
        let text_len = sb.text.trim_end().chars().count();
        if text_len == 0 || sb.boxes.is_empty() {
            return;
        }
        let index = self.sentences.len() as u32;
        for (range, target) in sb.closed {
            if range.end <= text_len {
                let surface = super::char_slice(&sb.text, range.clone()).to_string();
                self.markers.push(InlineCitationMarker {
                    sentence_index: index,
                    char_range: range,
                    surface,
                    bib_key: target,
                });
            }
        }
        let section_index = self.sections.len().checked_sub(1).map(|s| s as u32);
        self.sentences.push(SentenceSpan {
            index,
            page: sb.page,
            text: sb.text.trim_end().to_string(),
            boxes: sb.boxes,
            section_index,
        });
    }

    fn finish(mut self, raw: &[u8]) -> Result<ParsedDocument, DocError> {
        let max_page = self
            .sentences
            .iter()
            .map(|s| s.page)
            .chain(self.sections.iter().map(|s| s.page))
            .max();
        if let Some(max_page) = max_page {
            while self.pages.len() <= max_page as usize {
                let index = self.pages.len() as u32;
                self.pages.push(Page { index, width: DEFAULT_PAGE.0, height: DEFAULT_PAGE.1 });
            }
        }
        let doc_id = match self.idno_md5 {
            Some(md5) => md5,
            None => format!("tei-{}", &hex::encode(Sha256::digest(raw))[..16]),
        };
        let doc = ParsedDocument {
            doc_id,
            title: self.title.unwrap_or_default(),
            parse_scale: 1.0,
            pages: self.pages,
            sections: self.sections,
            sentences: self.sentences,
            bib_entries: self.bib,
            markers: self.markers,
        };
        doc.validate()?;
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r##"<?xml version="1.0" encoding="UTF-8"?>
<TEI xmlns="http://www.tei-c.org/ns/1.0">
  <teiHeader>
    <fileDesc>
      <titleStmt><title level="a" type="main">Threads &amp; Clips</title></titleStmt>
      <sourceDesc><biblStruct><idno type="MD5">ABC123</idno></biblStruct></sourceDesc>
    </fileDesc>
  </teiHeader>
  <facsimile>
    <surface n="1" ulx="0.0" uly="0.0" lrx="600.0" lry="800.0"/>
    <surface n="2" ulx="0.0" uly="0.0" lrx="600.0" lry="800.0"/>
  </facsimile>
  <text>
    <body>
      <div>
        <head n="1" coords="1,72,60,100,12">Introduction</head>
        <p>
          <s coords="1,72,80,400,10;1,72,92,120,10">Prior work studied
            curation <ref type="bibr" target="#b0" coords="1,150,92,10,10">[1]</ref>.</s>
          <s coords="2,72,80,300,10">Other systems exist <ref type="bibr">(Chen, 2020)</ref>.</s>
        </p>
      </div>
    </body>
    <back>
      <div type="references">
        <listBibl>
          <biblStruct xml:id="b0">
            <analytic>
              <title level="a" type="main">Sensemaking at scale</title>
              <author><persName><surname>Kang</surname></persName></author>
            </analytic>
            <monogr><title level="j">CHI</title><imprint><date type="published" when="2022-04"/></imprint></monogr>
          </biblStruct>
          <biblStruct xml:id="b1">
            <monogr><title level="m">A Book</title><imprint><date when="1100"/></imprint></monogr>
            <note type="raw_reference">Chen. A Book. 2020.</note>
          </biblStruct>
        </listBibl>
      </div>
    </back>
  </text>
</TEI>"##;

    #[test]
    fn imports_sentences_markers_and_bibliography() {
        let doc = import_tei(SAMPLE.as_bytes()).unwrap();
        assert_eq!(doc.doc_id, "ABC123");
        assert_eq!(doc.title, "Threads & Clips");
        assert_eq!(doc.pages.len(), 2);
        assert_eq!(doc.sections.len(), 1);
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(doc.sentences[0].text, "Prior work studied curation [1].");
        assert_eq!(doc.sentences[0].boxes.len(), 2);
        assert_eq!(doc.sentences[0].section_index, Some(0));
        assert_eq!(doc.sentences[1].page, 1);
        assert_eq!(doc.markers.len(), 2);
        assert_eq!(doc.markers[0].surface, "[1]");
        assert_eq!(doc.markers[0].bib_key.as_deref(), Some("b0"));
        assert_eq!(doc.markers[1].surface, "(Chen, 2020)");
        assert_eq!(doc.markers[1].bib_key, None);

        let b0 = &doc.bib_entries[0];
        assert_eq!(b0.title.as_deref(), Some("Sensemaking at scale"));
        assert_eq!(b0.year, Some(2022));
        assert!(b0.raw_text.contains("Kang"));
        let b1 = &doc.bib_entries[1];
        assert_eq!(b1.title.as_deref(), Some("A Book"));
        assert_eq!(b1.year, None, "implausible year dropped");
        assert_eq!(b1.raw_text, "Chen. A Book. 2020.");
    }

    #[test]
    fn missing_idno_hashes_input() {
        let raw = SAMPLE.replace("<idno type=\"MD5\">ABC123</idno>", "");
        let a = import_tei(raw.as_bytes()).unwrap();
        let b = import_tei(raw.as_bytes()).unwrap();
        assert!(a.doc_id.starts_with("tei-"));
        assert_eq!(a, b);
    }

    #[test]
    fn bad_coords_are_schema_errors() {
        let raw = SAMPLE.replace("2,72,80,300,10", "2,72,eighty,300,10");
        assert!(matches!(import_tei(raw.as_bytes()), Err(DocError::Schema { .. })));
    }

    #[test]
    fn non_tei_root_rejected() {
        assert!(matches!(import_tei(b"<html></html>"), Err(DocError::Schema { .. })));
    }
}
