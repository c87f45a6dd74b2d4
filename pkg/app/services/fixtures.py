"""
Deterministic synthetic fixtures.

Tree written by generate_fixtures(out_dir, seed):

    faqkit.env                  config for running the CLI on the tree
    warc/minimal.warc           warcinfo + request + response
    warc/faq.warc               multilingual FAQ pages, filter cases, a PDF
    warc/faq.warc.gz            the same records, one gzip member each
    warc/malformed_json.warc    broken JSON-LD blocks next to valid ones
    warc/graph_variant.warc     @graph, @type lists, single mainEntity
    warc/chunked.warc           chunked, gzip and unsupported encodings
    warc/truncated.warc         a record cut short of its Content-Length
    warc/separable.warc         the separable corpus pages as FAQ HTML
    corpus/hotels.jsonl         10 templated hotel pages + 1 unrelated page
    corpus/expedia.jsonl        domains spread over several languages
    corpus/separable.jsonl      20 pages x 6 pairs sharing private tokens
    language/map.jsonl          pass-through language tags for every WARC page
    oracles/*.json              expected outcomes from app.services.oracles

Expected values in the sidecars come from the fixture definitions and the
brute-force oracles, never from the pipeline itself.
"""
import gzip
import json
import logging
import random
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from app.schemas.corpus import FaqPage
from app.services import oracles
from app.services.corpus import build_page, write_corpus
from app.services.warc_writer import WarcWriter, http_response

logger = logging.getLogger(__name__)

DEFAULT_FIXTURE_SEED = 1


@dataclass(frozen=True)
class FixtureQuestion:
    question: str
    answer: str
    language: str
    accepted: bool = True


@dataclass(frozen=True)
class FixturePage:
    url: str
    questions: Tuple[FixtureQuestion, ...]


@dataclass
class FixtureSet:
    root: Path
    files: Dict[str, Path] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Path:
        return self.files[name]


# ═══════════════════════════════════════════════════════════════════════════
# HTML
# ═══════════════════════════════════════════════════════════════════════════

def faq_jsonld(questions, answer_key: str = "acceptedAnswer") -> Dict[str, Any]:
    return {
        "@context": "https://schema.org",
        "@type": "FAQPage",
        "mainEntity": [
            {
                "@type": "Question",
                "name": q.question,
                answer_key: {"@type": "Answer", "text": q.answer},
            }
            for q in questions
        ],
    }


def html_page(title: str, blocks: List[str]) -> str:
    scripts = "".join(f'<script type="application/ld+json">\n{b}\n</script>\n' for b in blocks)
    return (
        "<!DOCTYPE html>\n<html>\n<head>\n"
        f"<meta charset=\"utf-8\">\n<title>{title}</title>\n{scripts}"
        "<style>body { font-family: sans-serif; }</style>\n"
        "</head>\n<body>\n"
        f"<h1>{title}</h1>\n<p>Frequently asked questions.</p>\n"
        "</body>\n</html>\n"
    )


def _block(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2)


def _faq_html(page: FixturePage) -> str:
    return html_page(page.url, [_block(faq_jsonld(page.questions))])


# ═══════════════════════════════════════════════════════════════════════════
# WARC CONTENT
# ═══════════════════════════════════════════════════════════════════════════

FAQ_PAGES: Tuple[FixturePage, ...] = (
    FixturePage("https://www.grandhotel-example.com/en/faq", (
        FixtureQuestion("Does the hotel have an airport shuttle?", "Yes.<br/>See &amp; read our policy.", "en"),
        FixtureQuestion("Is breakfast included?", "Breakfast is served from <b>7am</b> to 10am and is included in all rates.", "en"),
        FixtureQuestion("Price list", "Rooms start at 120 EUR per night.", "en", accepted=False),
        FixtureQuestion("Can I pay by card?", "{ \"code\": 1 }", "en", accepted=False),
    )),
    FixturePage("https://hilfe.reiseportal.de/faq", (
        FixtureQuestion("Wie kann ich meine Buchung ändern?", "Sie können Ihre Buchung im Kundenkonto ändern.", "de"),
        FixtureQuestion("Gibt es eine Stornogebühr?", "Bis zwei Tage vor Anreise ist die Stornierung kostenlos.", "de"),
    )),
    FixturePage("https://www.kayak.fr/aide", (
        FixtureQuestion("Comment modifier ma réservation ?", "Connectez-vous à votre compte puis choisissez la réservation.", "fr"),
        FixtureQuestion("Do you speak English?", "Our support team answers in English and French.", "en"),
        FixtureQuestion("Puis-je annuler gratuitement ?", "L'annulation est gratuite jusqu'à deux jours avant l'arrivée.", "fr"),
        FixtureQuestion("Where is my invoice?", "Invoices are in the <i>Bookings</i> section of your account.", "en"),
    )),
    FixturePage("https://www.expedia.es/preguntas", (
        FixtureQuestion("¿Cómo cambio mi reserva?", "Puede cambiarla desde la sección Mis viajes.", "es"),
        FixtureQuestion("[Promo] ¿Hay descuentos?", "Consulte nuestras ofertas.", "es", accepted=False),
        FixtureQuestion("¿Puedo pagar a plazos?", "Sí, con las tarjetas que aparecen en la página de pago.", "es"),
    )),
    FixturePage("https://www.example-souq.com/ar/faq", (
        FixtureQuestion("هل يوجد توصيل مجاني؟", "نعم، التوصيل مجاني للطلبات فوق مئة ريال.", "ar"),
    )),
    FixturePage("https://www.expedia.fr/aide", (
        FixtureQuestion("Comment obtenir une facture ?", "La facture est envoyée par courriel après le paiement.", "fr"),
        FixtureQuestion("Les taxes sont-elles incluses ?", "Oui, toutes les taxes sont incluses dans le prix affiché.", "fr"),
    )),
)

PDF_URL = "https://www.grandhotel-example.com/brochure.pdf"
NO_FAQ_URL = "https://www.plainsite.com/about"

GRAPH_PAGES: Tuple[Tuple[str, Any], ...] = (
    ("https://www.graphsite.com/faq", {
        "@context": "https://schema.org",
        "@graph": [
            {"@type": "WebSite", "name": "Graph site"},
            {
                "@type": ["FAQPage", "WebPage"],
                "mainEntity": {
                    "@type": "Question",
                    "name": "Is the graph variant supported?",
                    "acceptedAnswer": {"@type": "Answer", "text": "Yes, FAQPage items inside @graph are read."},
                },
            },
        ],
    }),
    ("https://www.arraysite.com/faq", [
        {"@context": "https://schema.org", "@type": "Organization", "name": "Array site"},
        {
            "@context": "https://schema.org",
            "@type": "FAQPage",
            "mainEntity": [
                {
                    "@type": "Question",
                    "name": "Are top-level arrays supported?",
                    "acceptedAnswer": [{"@type": "Answer", "text": "Yes, the first accepted answer is used."}],
                },
                {
                    "@type": "Question",
                    "name": "What if only a suggested answer exists?",
                    "suggestedAnswer": {"@type": "Answer", "text": "The suggested answer is used instead."},
                },
            ],
        },
    ]),
)

MALFORMED_PAGES: Tuple[Tuple[str, List[str]], ...] = (
    ("https://www.brokenjson.com/faq", [
        '{"@type": "FAQPage", "mainEntity": [ {"@type": "Question", "name": "Broken?", ',
        _block(faq_jsonld((
            FixtureQuestion("Does the valid block still count?", "Yes, only the broken block is skipped.", "en"),
            FixtureQuestion("Is the order preserved?", "Items keep their markup order.", "en"),
        ))),
    ]),
    ("https://www.onlybroken.com/faq", ['{"@type": "FAQPage", "mainEntity": [}']),
)

CHUNKED_PAGES: Tuple[FixturePage, ...] = (
    FixturePage("https://www.chunked-site.com/faq", (
        FixtureQuestion("Is chunked transfer encoding handled?", "Yes, the body is de-chunked before decoding.", "en"),
        FixtureQuestion("Are chunk boundaries invisible?", "They are removed before the HTML is parsed.", "en"),
    )),
    FixturePage("https://www.gzip-site.com/faq", (
        FixtureQuestion("Are gzip bodies inflated?", "Yes, Content-Encoding gzip is supported.", "en"),
    )),
    FixturePage("https://www.brotli-site.com/faq", (
        FixtureQuestion("Are brotli bodies read?", "No, such records are skipped and counted.", "en"),
    )),
)

HOTEL_NAMES = (
    "Ritz Paris", "George Cinq", "Plaza Athenee", "Le Meurice", "Le Bristol",
    "Shangri La", "Mandarin Oriental", "Royal Monceau", "Park Hyatt", "Hotel Crillon",
)
HOTEL_TEMPLATE = (
    ("Does {name} have an airport shuttle?",
     "A shuttle service to both airports is available every day between six in the morning and "
     "eleven at night and it can be booked at the front desk or by email at least twenty four "
     "hours before departure with a small fee per person and free seats for children under twelve"),
    ("Is breakfast included at {name}?",
     "Breakfast is served in the main restaurant every morning from seven until half past ten and "
     "it is included in most flexible rates while guests on other rates can add it at the front "
     "desk for a fixed price per adult and a reduced price for children"),
    ("Can I bring my pet to {name}?",
     "Small pets are welcome in most room categories for a daily cleaning fee and they must stay on "
     "a leash in all public areas while larger animals and pets in suites need written approval "
     "from the reservations team before the day of arrival"),
    ("Does {name} offer parking?",
     "Valet parking is offered at the main entrance around the clock and cars are kept in a secure "
     "underground garage nearby for a nightly charge that is added to the room bill at check out "
     "and electric vehicles can be charged on request"),
    ("What time is check in at {name}?",
     "Check in starts at three in the afternoon and check out is at noon while early arrival and late "
     "departure depend on availability on the day and can be requested in advance through the "
     "concierge team without any guarantee of a free upgrade"),
)
HOTEL_EXTRA_PAIR = ("Is there a gym?", "Yes, the gym is open all day.")
HOTEL_WITH_EXTRA = 3


def hotel_pages():
    pages = []
    for i, name in enumerate(HOTEL_NAMES):
        slug = name.lower().replace(" ", "")
        pairs = [(q.format(name=name), a) for q, a in HOTEL_TEMPLATE]
        if i == HOTEL_WITH_EXTRA:
            pairs.append(HOTEL_EXTRA_PAIR)
        pages.append(build_page(f"https://www.{slug}.com/faq", "en", pairs))
    pages.append(build_page("https://www.cookingschool.com/faq", "en", [
        ("How long is a pastry course?", "Each pastry course runs for six evenings of three hours."),
        ("Do I need my own knives?", "All tools and ingredients are provided in the kitchen."),
        ("Can I get a gift voucher?", "Vouchers can be bought online and are valid for one year."),
    ]))
    return pages


EXPEDIA_SITES = (
    ("https://www.expedia.com/help", "en", 4),
    ("https://www.expedia.fr/aide", "fr", 3),
    ("https://www.expedia.es/ayuda", "es", 3),
    ("https://www.travelguide.com/faq", "en", 5),
    ("https://help.domain.com/faq", "en", 6),
    ("https://www.domain.co.uk/faq", "en", 2),
    ("https://www.monvoyage.fr/faq", "fr", 4),
    ("https://www.viajes.es/faq", "es", 4),
)
_EXPEDIA_TEXT = {
    "en": ("How do I change booking number {i} on {site}?", "Open booking {i} in your {site} account and choose change."),
    "fr": ("Comment modifier la réservation {i} sur {site} ?", "Ouvrez la réservation {i} dans votre compte {site}."),
    "es": ("¿Cómo cambio la reserva {i} en {site}?", "Abra la reserva {i} en su cuenta de {site}."),
}


def expedia_pages():
    pages = []
    for url, language, size in EXPEDIA_SITES:
        site = url.split("//", 1)[1].split("/", 1)[0]
        q, a = _EXPEDIA_TEXT[language]
        pages.append(build_page(url, language, [(q.format(i=i, site=site), a.format(i=i, site=site)) for i in range(size)]))
    return pages


SEPARABLE_PAGES = 20
SEPARABLE_PAIRS = 6


def private_token(rng: random.Random, length: int = 8) -> str:
    return "".join(rng.choice(string.ascii_lowercase) for _ in range(length))


def separable_pages(seed: int = DEFAULT_FIXTURE_SEED, pages: int = SEPARABLE_PAGES, pairs: int = SEPARABLE_PAIRS):
    """Each Q/A pair shares two private tokens found nowhere else."""
    rng = random.Random(f"separable:{seed}")
    used = set()
    result = []
    for p in range(pages):
        items = []
        for _ in range(pairs):
            tokens = []
            while len(tokens) < 2:
                tok = private_token(rng)
                if tok not in used:
                    used.add(tok)
                    tokens.append(tok)
            a_tok, b_tok = tokens
            items.append((f"What about {a_tok} {b_tok}?", f"{a_tok} {b_tok} is covered here."))
        result.append(build_page(f"https://www.separable{p:02d}.com/faq", "en", items))
    return result


# ═══════════════════════════════════════════════════════════════════════════
# GENERATION
# ═══════════════════════════════════════════════════════════════════════════

def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _write_faq_warc(path: Path, gzip_records: bool) -> None:
    with WarcWriter(path, gzip_records=gzip_records) as w:
        w.write_warcinfo({"software": "faqkit fixtures", "format": "WARC File Format 1.0"})
        w.write_request(FAQ_PAGES[0].url)
        for page in FAQ_PAGES[:3]:
            w.write_response(page.url, _faq_html(page))
        w.write_record("response", http_response(b"%PDF-1.4 fixture", content_type="application/pdf"), target_uri=PDF_URL)
        for page in FAQ_PAGES[3:]:
            w.write_response(page.url, _faq_html(page))
        w.write_response(NO_FAQ_URL, html_page("About", [_block(
            {"@context": "https://schema.org", "@type": "Organization", "name": "Plain site"}
        )]))


def _language_map_rows(separable: List[FaqPage]) -> List[Dict[str, Any]]:
    rows = []
    for page in FAQ_PAGES + CHUNKED_PAGES:
        for i, q in enumerate(page.questions):
            rows.append({"url": page.url, "pair_index": i, "language": q.language})
    for url, data in GRAPH_PAGES:
        for i in range(oracles.count_jsonld_questions(html_page(url, [_block(data)]))):
            rows.append({"url": url, "pair_index": i, "language": "en"})
    for i in range(2):
        rows.append({"url": MALFORMED_PAGES[0][0], "pair_index": i, "language": "en"})
    for page in separable:
        for i in range(page.size):
            rows.append({"url": page.url, "pair_index": i, "language": page.language})
    return rows


def generate_fixtures(out_dir: Union[str, Path], seed: int = DEFAULT_FIXTURE_SEED) -> FixtureSet:
    """Write the whole fixture tree; same seed, same bytes."""
    root = Path(out_dir)
    fs = FixtureSet(root)
    warc = root / "warc"

    # ── WARC archives ──
    fs.files["minimal"] = warc / "minimal.warc"
    with WarcWriter(fs["minimal"]) as w:
        w.write_warcinfo({"software": "faqkit fixtures"})
        w.write_request(FAQ_PAGES[0].url)
        w.write_response(FAQ_PAGES[0].url, _faq_html(FAQ_PAGES[0]))

    fs.files["faq"] = warc / "faq.warc"
    _write_faq_warc(fs["faq"], gzip_records=False)
    fs.files["faq_gz"] = warc / "faq.warc.gz"
    _write_faq_warc(fs["faq_gz"], gzip_records=True)

    fs.files["malformed_json"] = warc / "malformed_json.warc"
    with WarcWriter(fs["malformed_json"]) as w:
        for url, blocks in MALFORMED_PAGES:
            w.write_response(url, html_page(url, blocks))

    fs.files["graph_variant"] = warc / "graph_variant.warc"
    with WarcWriter(fs["graph_variant"]) as w:
        for url, data in GRAPH_PAGES:
            w.write_response(url, html_page(url, [_block(data)]))

    fs.files["chunked"] = warc / "chunked.warc"
    chunked, gzipped, brotli = CHUNKED_PAGES
    with WarcWriter(fs["chunked"]) as w:
        w.write_response(chunked.url, _faq_html(chunked), chunk_size=64)
        w.write_record("response", http_response(
            gzip.compress(_faq_html(gzipped).encode("utf-8"), mtime=0),
            extra_headers=[("Content-Encoding", "gzip")],
        ), target_uri=gzipped.url)
        w.write_record("response", http_response(
            _faq_html(brotli).encode("utf-8"),
            extra_headers=[("Content-Encoding", "br")],
        ), target_uri=brotli.url)

    fs.files["truncated"] = warc / "truncated.warc"
    with WarcWriter(fs["truncated"]) as w:
        for i, page in enumerate(FAQ_PAGES[:3]):
            payload = http_response(_faq_html(page).encode("utf-8"))
            w.write_record("response", payload, target_uri=page.url,
                           truncate_to=len(payload) // 2 if i == 1 else None)

    # ── Corpora ──
    hotels = hotel_pages()
    fs.files["hotels"] = root / "corpus" / "hotels.jsonl"
    write_corpus(hotels, fs["hotels"])
    fs.files["expedia"] = root / "corpus" / "expedia.jsonl"
    write_corpus(expedia_pages(), fs["expedia"])
    separable = separable_pages(seed)
    fs.files["separable"] = root / "corpus" / "separable.jsonl"
    write_corpus(separable, fs["separable"])
    fs.files["separable_warc"] = warc / "separable.warc"
    with WarcWriter(fs["separable_warc"]) as w:
        for page in separable:
            w.write_response(page.url, html_page(page.url, [_block(faq_jsonld(page.pairs))]))

    # ── Language map ──
    fs.files["language_map"] = root / "language" / "map.jsonl"
    fs["language_map"].parent.mkdir(parents=True, exist_ok=True)
    with open(fs["language_map"], "w", encoding="utf-8", newline="\n") as f:
        for row in _language_map_rows(separable):
            f.write(json.dumps(row, ensure_ascii=False) + "\n")

    # ── Oracle sidecars ──
    oracle_dir = root / "oracles"
    accepted = [q for page in FAQ_PAGES for q in page.questions if q.accepted]
    _write_json(oracle_dir / "extraction.json", {
        "faq.warc": {
            "records": 2 + len(FAQ_PAGES) + 2,
            "html_responses": len(FAQ_PAGES) + 1,
            "questions_in_markup": sum(oracles.count_jsonld_questions(_faq_html(p)) for p in FAQ_PAGES),
            "accepted_pairs": len(accepted),
            "rejected": {
                "no_question_mark": 1,
                "code_like_prefix": 2,
            },
            "pages": len({(p.url, q.language) for p in FAQ_PAGES for q in p.questions if q.accepted}),
        },
        "minimal.warc": {"records": 3, "warc_types": ["warcinfo", "request", "response"]},
        "malformed_json.warc": {
            "json_blocks": sum(len(blocks) for _, blocks in MALFORMED_PAGES),
            "json_blocks_skipped": 2,
            "questions_in_markup": sum(oracles.count_jsonld_questions(html_page(u, b)) for u, b in MALFORMED_PAGES),
        },
        "graph_variant.warc": {
            "questions_in_markup": sum(oracles.count_jsonld_questions(html_page(u, [_block(d)])) for u, d in GRAPH_PAGES),
        },
        "chunked.warc": {"html_responses": 2, "unsupported_encoding": 1},
        "truncated.warc": {"records": 2, "skipped": 1},
    })

    components = oracles.brute_force_components(
        {p.page_id: " ".join(f"{x.question} {x.answer}" for x in p.pairs) for p in hotels}, 0.75
    )
    by_id = {p.page_id: p for p in hotels}
    largest = max(components, key=len)
    _write_json(oracle_dir / "dedup_hotels.json", {
        "pages_before": len(hotels),
        "pages_after": len(components),
        "component_sizes": sorted(len(c) for c in components),
        "components": components,
        "survivor": min(largest, key=lambda i: (-by_id[i].size, by_id[i].url, i)),
    })

    _write_json(oracle_dir / "random_baseline.json", {
        "separable_pages": SEPARABLE_PAGES,
        "pairs_per_page": SEPARABLE_PAIRS,
        "expected_mrr": float(oracles.harmonic_mrr(SEPARABLE_PAIRS)),
        "expected_mrr_5": float(oracles.harmonic_mrr(5)),
        "expected_p_at_1": 1 / SEPARABLE_PAIRS,
    })

    tfidf_answers = [
        "the shuttle leaves every hour",
        "breakfast is served every morning",
        "the shuttle is free for children",
    ]
    tfidf_questions = ["when does the shuttle leave", "is breakfast served", "is parking free"]
    _write_json(oracle_dir / "tfidf.json", {
        "questions": tfidf_questions,
        "answers": tfidf_answers,
        "matrix": oracles.tfidf_matrix(tfidf_questions, tfidf_answers),
    })
    _write_json(oracle_dir / "metrics.json", {
        "ranks": [1, 2, 4],
        "mrr": float(oracles.reciprocal_rank_mean([1, 2, 4])),
    })

    # ── Config ──
    fs.files["config"] = root / "faqkit.env"
    fs["config"].write_text(
        "# Settings for running the pipeline on this fixture tree\n"
        "FAQKIT_LANGUAGE_FLOOR=1\n"
        "FAQKIT_LANGUAGE_MAP_PATH=language/map.jsonl\n",
        encoding="utf-8",
    )
    logger.info(f"Generated {len(fs.files)} fixture files under {root} (seed {seed})")
    return fs
