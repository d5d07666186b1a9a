//! Seeded synthetic news corpora with aligned entity annotations.
//!
//! Captions are filled from templates with entity surfaces drawn from
//! per-topic vocabularies, so entity pools overlap within a topic the way
//! real news does. Roughly one caption in twelve carries no entity. Every
//! caption ends in a unique photo number, so captions never collide.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::annotation::{AnnotatedCaption, Annotations, EntitySpan, EntityType};
use crate::corpus::{Corpus, NewsRecord, Split};
use crate::seed::{mix, rng_from_seed};

const FIRST: &[&str] = &[
    "Alice", "Bruno", "Chen", "Dalia", "Emeka", "Farah", "Goran", "Hana", "Ines", "Jonas", "Kofi", "Lena", "Mateo",
    "Nadia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tariq", "Ursula", "Viktor", "Wen", "Yara",
];
const LAST: &[&str] = &[
    "Abara", "Berg", "Costa", "Dubois", "Eriksen", "Fischer", "Garcia", "Haddad", "Ito", "Jensen", "Kowalski",
    "Larsen", "Moreau", "Novak", "Okafor", "Petrov", "Rossi", "Santos", "Tanaka", "Varga", "Weber", "Zhou",
];
const PLACES: &[&str] = &[
    "Paris",
    "Berlin",
    "Lagos",
    "Lima",
    "Oslo",
    "Nairobi",
    "Kyiv",
    "Manila",
    "Quito",
    "Dublin",
    "Hanoi",
    "Accra",
    "Seoul",
    "Porto",
    "Tbilisi",
    "Dakar",
    "Bogotá",
    "Kraków",
    "Reykjavík",
    "Montréal",
    "Zürich",
    "Köln",
];
const ORGS: &[&str] = &[
    "the United Nations",
    "Greenpeace",
    "the World Bank",
    "Amnesty International",
    "FIFA",
    "the Red Cross",
    "NASA",
    "the European Commission",
    "Interpol",
    "UNESCO",
    "the IMF",
    "Oxfam",
];
const EVENTS: &[&str] = &[
    "the Olympic Games",
    "the World Cup",
    "Glastonbury",
    "the Climate Summit",
    "Carnival",
    "the Film Festival",
    "the Book Fair",
    "the Marathon",
];
const NORPS: &[&str] = &["French", "Nigerian", "Peruvian", "Norwegian", "Kenyan", "Ukrainian", "Korean", "Irish"];
const FACS: &[&str] = &["the Golden Gate Bridge", "Wembley Stadium", "the Louvre", "Heathrow Airport", "the Colosseum"];
const MONTHS: &[&str] = &[
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];
const TIMES: &[&str] = &["dawn", "midday", "9am", "noon", "dusk", "midnight", "6pm"];

/// Template pieces: literal text or an entity slot.
#[derive(Clone, Copy)]
enum Piece {
    Lit(&'static str),
    Slot(EntityType),
}

use EntityType::*;
use Piece::{Lit, Slot};

const TEMPLATES: &[&[Piece]] = &[
    &[Slot(Person), Lit(" visited "), Slot(Gpe), Lit(" in "), Slot(Date)],
    &[Slot(Person), Lit(" meets "), Slot(Person), Lit(" in "), Slot(Gpe)],
    &[Slot(Org), Lit(" officials speak to reporters in "), Slot(Gpe), Lit(" on "), Slot(Date)],
    &[Lit("Crowds gather at "), Slot(Fac), Lit(" during "), Slot(Event)],
    &[Slot(Norp), Lit(" fans celebrate in "), Slot(Gpe), Lit(" at "), Slot(Time)],
    &[Slot(Person), Lit(" of "), Slot(Org), Lit(" arrives at "), Slot(Event)],
    &[Lit("Protesters march through "), Slot(Gpe), Lit(" against "), Slot(Org)],
    &[Slot(Person), Lit(" speaks at "), Slot(Fac)],
    &[Lit("Flooding near "), Slot(Gpe), Lit(" on "), Slot(Date)],
    &[Slot(Person), Lit(" and "), Slot(Person), Lit(" attend "), Slot(Event), Lit(" in "), Slot(Gpe)],
    &[Lit("Rescue workers search the rubble at "), Slot(Time)],
    &[Lit("A quiet street after the storm")],
];

struct TopicVocab {
    people: Vec<String>,
    places: Vec<&'static str>,
    orgs: Vec<&'static str>,
    events: Vec<&'static str>,
    dates: Vec<String>,
}

impl TopicVocab {
    fn new(seed: u64, topic: usize) -> Self {
        let mut rng = rng_from_seed(mix(seed, topic as u64));
        let people =
            (0..8).map(|_| format!("{} {}", FIRST.choose(&mut rng).unwrap(), LAST.choose(&mut rng).unwrap())).collect();
        let sample = |rng: &mut rand_chacha::ChaCha8Rng, src: &[&'static str], n: usize| {
            src.choose_multiple(rng, n.min(src.len())).copied().collect::<Vec<_>>()
        };
        let places = sample(&mut rng, PLACES, 6);
        let orgs = sample(&mut rng, ORGS, 4);
        let events = sample(&mut rng, EVENTS, 3);
        let dates =
            (0..5).map(|_| format!("{} {}", MONTHS.choose(&mut rng).unwrap(), rng.gen_range(1995..2024))).collect();
        Self { people, places, orgs, events, dates }
    }

    fn surface(&self, etype: EntityType, rng: &mut impl Rng) -> String {
        match etype {
            Person => self.people.choose(rng).unwrap().clone(),
            Gpe | Loc => self.places.choose(rng).unwrap().to_string(),
            Org => self.orgs.choose(rng).unwrap().to_string(),
            Event => self.events.choose(rng).unwrap().to_string(),
            Date => self.dates.choose(rng).unwrap().clone(),
            Time => TIMES.choose(rng).unwrap().to_string(),
            Norp => NORPS.choose(rng).unwrap().to_string(),
            Fac => FACS.choose(rng).unwrap().to_string(),
        }
    }
}

pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub annotations: Annotations,
}

pub fn topic_name(i: usize) -> String {
    format!("topic-{i:03}")
}

impl SyntheticCorpus {
    /// `n` training records with ids `1..=n` spread over `topics` topics.
    pub fn generate(n: usize, topics: usize, seed: u64) -> Self {
        Self::generate_with_splits(n, topics, seed, &[Split::Train])
    }

    /// Like [`SyntheticCorpus::generate`], assigning splits round-robin.
    pub fn generate_with_splits(n: usize, topics: usize, seed: u64, splits: &[Split]) -> Self {
        assert!(topics > 0 && !splits.is_empty());
        let vocab: Vec<TopicVocab> = (0..topics).map(|t| TopicVocab::new(seed, t)).collect();
        let mut records = Vec::with_capacity(n);
        let mut captions = Vec::with_capacity(n);
        for i in 0..n {
            let id = i as u64 + 1;
            let mut rng = rng_from_seed(mix(mix(seed, 0x5EED), id));
            let topic = rng.gen_range(0..topics);
            let template = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
            let mut caption = String::new();
            let mut len = 0usize;
            let mut entities = Vec::new();
            for piece in template {
                let text = match *piece {
                    Lit(s) => s.to_string(),
                    Slot(etype) => {
                        let surface = vocab[topic].surface(etype, &mut rng);
                        let chars = surface.chars().count();
                        entities.push(EntitySpan::new(etype, len, len + chars, surface.clone()));
                        surface
                    }
                };
                len += text.chars().count();
                caption.push_str(&text);
            }
            caption.push_str(&format!(" (photo {id})"));
            records.push(NewsRecord {
                id,
                image_ref: format!("images/{id:07}.jpg"),
                caption,
                topic: topic_name(topic),
                source: ["bbc", "guardian", "usa_today", "washington_post"][i % 4].to_string(),
                split: splits[i % splits.len()],
            });
            if !entities.is_empty() {
                captions.push(AnnotatedCaption { record_id: id, entities });
            }
        }
        let corpus = Corpus::from_records(records).expect("synthetic records are valid");
        let annotations = Annotations::from_captions(&corpus, captions).expect("synthetic spans are aligned");
        Self { corpus, annotations }
    }
}
