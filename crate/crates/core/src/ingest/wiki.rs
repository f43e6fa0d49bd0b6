//! Encyclopedia page scraping and caption-year parsing.
//!
//! Pages are fetched through the transport layer and parsed for the
//! infobox (or lead-figure) image and its caption. A caption yields an
//! image year only when it contains exactly one plausible year token.

use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::transport::Transport;

/// Result of scanning a caption for a year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionParse {
    pub caption: String,
    pub extracted_year: Option<i32>,
    pub match_count: usize,
}

/// Find year tokens in a caption.
///
/// A token qualifies when it is a maximal digit run of exactly four
/// digits (so "41992" has none) whose value falls in 1900..=2099. The
/// year is extracted only when exactly one token qualifies.
pub fn parse_caption_year(caption: &str) -> CaptionParse {
    let mut years = Vec::new();
    let mut run_start: Option<usize> = None;
    let chars: Vec<char> = caption.chars().collect();
    for i in 0..=chars.len() {
        let is_digit = i < chars.len() && chars[i].is_ascii_digit();
        match (run_start, is_digit) {
            (None, true) => run_start = Some(i),
            (Some(start), false) => {
                if i - start == 4 {
                    let token: String = chars[start..i].iter().collect();
                    if let Ok(v) = token.parse::<i32>() {
                        if (1900..=2099).contains(&v) {
                            years.push(v);
                        }
                    }
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let match_count = years.len();
    CaptionParse {
        caption: caption.to_string(),
        extracted_year: if match_count == 1 { Some(years[0]) } else { None },
        match_count,
    }
}

/// An image reference extracted from a page, paired with its caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageImage {
    pub image_url: String,
    pub caption: String,
}

/// Fetch a page and return its infobox or lead-figure image with caption.
///
/// Returns `Ok(None)` when the page is missing (HTTP 4xx) or has no
/// captioned infobox/lead image. 5xx surfaces from the transport as a
/// retriable error.
pub fn scrape_page_image(
    transport: &dyn Transport,
    page_url: &str,
    wiki_base: &str,
) -> Result<Option<PageImage>> {
    let resp = transport.get(page_url)?;
    if resp.status != 200 {
        log::debug!("scrape {page_url}: HTTP {}", resp.status);
        return Ok(None);
    }
    Ok(extract_page_image(&resp.body_str(), wiki_base))
}

/// Parse page HTML for the infobox image + caption, falling back to the
/// first `<figure>` with a caption. Images outside those containers
/// (site chrome, logos) are ignored.
pub fn extract_page_image(html: &str, wiki_base: &str) -> Option<PageImage> {
    let doc = Html::parse_document(html);
    let infobox_sel = Selector::parse("table.infobox").unwrap();
    let img_sel = Selector::parse("img").unwrap();
    let caption_sel = Selector::parse(".infobox-caption").unwrap();

    for infobox in doc.select(&infobox_sel) {
        let img = infobox.select(&img_sel).next();
        let caption = infobox.select(&caption_sel).next();
        if let (Some(img), Some(caption)) = (img, caption) {
            if let Some(src) = img.value().attr("src") {
                return Some(PageImage {
                    image_url: resolve_src(src, wiki_base),
                    caption: element_text(&caption),
                });
            }
        }
    }

    let figure_sel = Selector::parse("figure").unwrap();
    let figcaption_sel = Selector::parse("figcaption").unwrap();
    for figure in doc.select(&figure_sel) {
        let img = figure.select(&img_sel).next();
        let caption = figure.select(&figcaption_sel).next();
        if let (Some(img), Some(caption)) = (img, caption) {
            if let Some(src) = img.value().attr("src") {
                return Some(PageImage {
                    image_url: resolve_src(src, wiki_base),
                    caption: element_text(&caption),
                });
            }
        }
    }
    None
}

fn element_text(el: &ElementRef) -> String {
    el.text().collect::<Vec<_>>().join(" ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn resolve_src(src: &str, wiki_base: &str) -> String {
    if src.starts_with("//") {
        format!("https:{src}")
    } else if src.starts_with('/') {
        format!("{}{src}", wiki_base.trim_end_matches('/'))
    } else {
        src.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caption_with_single_year() {
        let p = parse_caption_year("Smith in 1945");
        assert_eq!(p.extracted_year, Some(1945));
        assert_eq!(p.match_count, 1);
    }

    #[test]
    fn caption_with_two_years_extracts_nothing() {
        let p = parse_caption_year("between 1987 and 1990");
        assert_eq!(p.extracted_year, None);
        assert_eq!(p.match_count, 2);
    }

    #[test]
    fn digits_embedded_in_longer_run_do_not_count() {
        let p = parse_caption_year("catalogue no. 41992");
        assert_eq!(p.extracted_year, None);
        assert_eq!(p.match_count, 0);
    }

    #[test]
    fn years_out_of_range_do_not_count() {
        assert_eq!(parse_caption_year("built in 1845").match_count, 0);
        assert_eq!(parse_caption_year("year 2150").match_count, 0);
        assert_eq!(parse_caption_year("in 1900").extracted_year, Some(1900));
        assert_eq!(parse_caption_year("in 2099").extracted_year, Some(2099));
    }

    #[test]
    fn year_at_string_edges() {
        assert_eq!(parse_caption_year("1971").extracted_year, Some(1971));
        assert_eq!(parse_caption_year("photo, 2004").extracted_year, Some(2004));
        assert_eq!(parse_caption_year("1971 portrait").extracted_year, Some(1971));
    }

    #[test]
    fn extraction_iff_single_match() {
        // Purity + the single-match rule over assorted captions.
        for caption in [
            "",
            "no digits here",
            "one 1950",
            "two 1950 1960",
            "1950 1950",
            "a 195 0",
            "20000 leagues",
        ] {
            let a = parse_caption_year(caption);
            let b = parse_caption_year(caption);
            assert_eq!(a, b);
            assert_eq!(a.extracted_year.is_some(), a.match_count == 1);
        }
    }

    const INFOBOX_PAGE: &str = r#"
<html><body>
<img src="/static/site-logo.png" alt="logo">
<table class="infobox biography vcard">
  <tbody><tr><td>
    <img src="//upload.example.org/thumb/Smith_1945.jpg" width="220">
    <div class="infobox-caption">Smith in 1945</div>
  </td></tr></tbody>
</table>
</body></html>"#;

    #[test]
    fn infobox_image_and_caption_found() {
        let got = extract_page_image(INFOBOX_PAGE, "https://wiki.example.org").unwrap();
        assert_eq!(got.image_url, "https://upload.example.org/thumb/Smith_1945.jpg");
        assert_eq!(got.caption, "Smith in 1945");
    }

    #[test]
    fn logo_only_page_yields_nothing() {
        let html = r#"<html><body><div id="header"><img src="/logo.png"></div><p>text</p></body></html>"#;
        assert_eq!(extract_page_image(html, "https://w"), None);
    }

    #[test]
    fn page_without_images_yields_nothing() {
        assert_eq!(extract_page_image("<html><body><p>plain</p></body></html>", "https://w"), None);
    }

    #[test]
    fn lead_figure_used_when_no_infobox() {
        let html = r#"<html><body>
          <figure><img src="/media/a.jpg"><figcaption>A portrait, 1988</figcaption></figure>
        </body></html>"#;
        let got = extract_page_image(html, "https://wiki.example.org").unwrap();
        assert_eq!(got.image_url, "https://wiki.example.org/media/a.jpg");
        assert_eq!(got.caption, "A portrait, 1988");
    }
}
