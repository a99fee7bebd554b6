#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "slotfill/corpus.hpp"

namespace slotfill {

// Per-slot value lexicon, split into an in-train pool and a held-out pool.
// Held-out values share morpheme families with the train pool so the
// character path has something to generalize from.
struct SlotSpec {
  std::string type;
  std::vector<std::string> train_values;
  std::vector<std::string> heldout_values;
};

struct AppSpec {
  std::string name;
  std::vector<SlotSpec> slots;
  std::vector<std::string> templates;  // "{SlotType}" placeholders
  std::size_t max_slots_per_sentence = 1;
  double heldout_fraction = 0.2;  // sentences drawing from held-out pools

  const SlotSpec& slot(const std::string& type) const {
    for (const auto& s : slots)
      if (s.type == type) return s;
    throw ConfigError("app " + name + ": template references unknown slot " +
                      type);
  }

  std::set<std::string> slot_types() const {
    std::set<std::string> out;
    for (const auto& s : slots) out.insert(s.type);
    return out;
  }
};

// Widened value pool for a named slot (the over-represented-value fix).
inline void widen_slot(AppSpec& app, const std::string& type,
                       const std::vector<std::string>& extra) {
  for (auto& s : app.slots)
    if (s.type == type) {
      s.train_values.insert(s.train_values.end(), extra.begin(), extra.end());
      return;
    }
  throw std::runtime_error("widen_slot: unknown slot " + type);
}

namespace detail_synth {

inline std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z')
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// All prefix+suffix compounds; every fourth lands in the held-out pool.
inline SlotSpec compound_slot(std::string type,
                              const std::vector<std::string>& prefixes,
                              const std::vector<std::string>& suffixes,
                              bool capitalized) {
  SlotSpec out;
  out.type = std::move(type);
  std::size_t i = 0;
  for (const auto& p : prefixes)
    for (const auto& s : suffixes) {
      std::string v = p + s;
      if (capitalized) v = capitalize(v);
      (++i % 4 == 0 ? out.heldout_values : out.train_values).push_back(v);
    }
  return out;
}

inline SlotSpec list_slot(std::string type, std::vector<std::string> train,
                          std::vector<std::string> heldout = {}) {
  return SlotSpec{std::move(type), std::move(train), std::move(heldout)};
}

inline std::vector<std::string> city_values(bool heldout) {
  static const std::vector<std::string> prefixes = {
      "bay",   "lake",  "oak",   "river", "hill",  "glen",
      "brook", "mill",  "spring","fair",  "green", "wood",
      "clear", "stone", "port",  "ridge"};
  static const std::vector<std::string> suffixes = {
      "side", "view", "wood", "field", "ville", "ton", "dale", "crest",
      "haven"};
  std::vector<std::string> out;
  std::size_t i = 0;
  for (const auto& p : prefixes)
    for (const auto& s : suffixes) {
      if ((++i % 4 == 0) == heldout) out.push_back(capitalize(p + s));
    }
  return out;
}

inline SlotSpec city_slot(std::string type) {
  return SlotSpec{std::move(type), city_values(false), city_values(true)};
}

inline std::vector<std::string> date_values() {
  static const std::vector<std::string> months = {
      "Jan", "Feb", "Mar", "Apr", "May", "Jun",
      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  std::vector<std::string> out;
  for (const auto& m : months)
    for (int d = 1; d <= 28; d += 3) out.push_back(m + " " + std::to_string(d));
  return out;
}

inline SlotSpec date_slot(std::string type) {
  return SlotSpec{std::move(type), date_values(), {}};
}

inline SlotSpec time_slot(std::string type) {
  return SlotSpec{std::move(type),
                  {"5 pm", "6 pm", "7 pm", "8 pm", "9 pm", "noon", "10 am",
                   "11 am", "7 : 30 pm", "8 : 15 pm", "6 : 45 pm", "midnight"},
                  {}};
}

inline SlotSpec count_slot(std::string type) {
  return SlotSpec{std::move(type),
                  {"1", "2", "3", "4", "5", "6", "two", "three", "four",
                   "five", "six", "seven"},
                  {}};
}

}  // namespace detail_synth

// The four-app study suite: one anchor app with up to four slots per
// sentence, three smaller apps with one slot per sentence. Location,
// date, and count lexicons are shared across apps.
inline std::vector<AppSpec> default_suite() {
  using namespace detail_synth;
  std::vector<AppSpec> suite;

  {
    AppSpec u;
    u.name = "united";
    u.max_slots_per_sentence = 4;
    u.slots = {
        city_slot("FromLoc"),
        city_slot("ToLoc"),
        city_slot("SecondFromLoc"),
        city_slot("SecondToLoc"),
        date_slot("DepartDate"),
        date_slot("ReturnDate"),
        time_slot("DepartTime"),
        time_slot("ReturnTime"),
        count_slot("TicketQuantity"),
        list_slot("Nonstop", {"nonstop", "direct"}),
        list_slot("TicketClass", {"economy", "business", "first class",
                                  "premium economy"}),
        list_slot("TripType", {"one way", "round trip", "multi hop"}),
    };
    u.templates = {
        "please book flight from {FromLoc} to {ToLoc}",
        "book flight from {FromLoc} to {ToLoc} leaving {DepartDate}",
        "flight from {FromLoc} to {ToLoc} departing {DepartDate} returning {ReturnDate}",
        "i need a {Nonstop} flight to {ToLoc}",
        "find {TicketQuantity} {TicketClass} tickets to {ToLoc}",
        "book a {TripType} ticket from {FromLoc}",
        "flight to {ToLoc} leaving at {DepartTime}",
        "return flight lands at {ReturnTime} on {ReturnDate}",
        "then connect from {SecondFromLoc} to {SecondToLoc}",
        "fly me from {FromLoc} to {SecondToLoc} via {ToLoc}",
        "get {TicketQuantity} seats on the {DepartTime} departure",
        "search {TicketClass} fares from {FromLoc}",
        "departure {DepartDate} from {FromLoc} and make it {Nonstop}",
        "book the {TripType} option returning {ReturnDate}",
    };
    suite.push_back(std::move(u));
  }

  {
    AppSpec a;
    a.name = "airbnb";
    a.slots = {
        count_slot("NumPeople"),
        list_slot("RoomType", {"private room", "shared room", "entire place"}),
        compound_slot("Amenities",
                      {"free ", "pet ", "family ", "wheelchair ", "kid ",
                       "smoke ", "bike ", "gym ", "pool ", "beach "},
                      {"friendly", "access", "wifi", "parking"}, false),
        date_slot("StartDate"),
        date_slot("EndDate"),
        list_slot("DateRange",
                  {"Jan 4 to Jan 9", "Feb 7 to Feb 12", "Mar 2 to Mar 6",
                   "Apr 10 to Apr 14", "May 20 to May 25", "Jun 1 to Jun 8",
                   "Jul 3 to Jul 10", "Aug 12 to Aug 19", "Sep 5 to Sep 9",
                   "Oct 22 to Oct 27", "Nov 14 to Nov 18", "Dec 20 to Dec 28"}),
        city_slot("Loc"),
        list_slot("ListingType", {"apartment", "house", "cabin", "loft",
                                  "studio", "cottage"}),
        list_slot("Price", {"$ 40 a night", "$ 75 a night", "$ 120 a night",
                            "$ 200 a night", "$ 350 a week", "$ 900 a week"}),
        list_slot("PriceLower", {"$ 30", "$ 50", "$ 80", "$ 100", "$ 150"}),
        list_slot("PriceUpper", {"$ 200", "$ 300", "$ 500", "$ 800", "$ 1300"}),
    };
    a.templates = {
        "we need a place for {NumPeople} people",
        "looking for a {RoomType} this weekend",
        "it has to have {Amenities}",
        "does the listing offer {Amenities}",
        "we arrive on {StartDate}",
        "checking out on {EndDate}",
        "we would stay {DateRange}",
        "find a rental in {Loc}",
        "somewhere near {Loc} would be great",
        "a {ListingType} would suit us",
        "i want to pay about {Price}",
        "keep it above {PriceLower}",
        "i want to keep the price below {PriceUpper}",
        "book something with {Amenities} please",
        "any {ListingType} in town",
        "we will be {NumPeople} adults",
        "staying from {StartDate}",
        "leaving on {EndDate}",
    };
    suite.push_back(std::move(a));
  }

  {
    AppSpec g;
    g.name = "greyhound";
    g.slots = {
        date_slot("DepartDate"),
        time_slot("DepartTime"),
        date_slot("ReturnDate"),
        time_slot("ReturnTime"),
        city_slot("LeavingFrom"),
        city_slot("GoingTo"),
        count_slot("NumChildren"),
        count_slot("NumAdults"),
        count_slot("NumSeniors"),
        compound_slot("PromoCode",
                      {"save", "fall", "ride", "trip", "bus", "go", "summer",
                       "winter"},
                      {"10", "15", "20", "25", "40"}, false),
        list_slot("DiscountType", {"student", "military", "senior", "veteran"}),
        list_slot("OneWay", {"one way", "round trip"}),
        list_slot("WheelchairUse", {"wheelchair", "wheelchair accessible"}),
    };
    g.templates = {
        "we should leave on {DepartDate}",
        "the bus leaves at {DepartTime}",
        "we should return on {ReturnDate}",
        "coming back around {ReturnTime}",
        "we are leaving from {LeavingFrom}",
        "heading to {GoingTo} next week",
        "traveling with {NumChildren} kids",
        "tickets for {NumAdults} adults",
        "there will be {NumSeniors} seniors with us",
        "i have promo code {PromoCode}",
        "can i use the code {PromoCode}",
        "do you have a {DiscountType} discount",
        "make it {OneWay} please",
        "we need {WheelchairUse} seating",
        "catch a bus to {GoingTo}",
        "bus out of {LeavingFrom} tomorrow",
        "departing {DepartDate} in the morning",
        "back home by {ReturnDate}",
    };
    suite.push_back(std::move(g));
  }

  {
    AppSpec o;
    o.name = "opentable";
    o.slots = {
        list_slot("Cuisine",
                  {"thai", "italian", "mexican", "chinese", "indian", "french",
                   "greek", "japanese", "korean", "vietnamese"},
                  {"lebanese", "ethiopian", "turkish", "spanish"}),
        date_slot("Date"),
        time_slot("Time"),
        city_slot("Loc"),
        count_slot("NumPeople"),
        compound_slot("RestaurantName",
                      {"smoke", "steak", "road", "chop", "ale", "brew",
                       "grill", "salt", "spice", "fire", "stone", "creek"},
                      {"house", "barn", "shack"}, true),
    };
    o.templates = {
        "lets get {Cuisine} food tonight",
        "in the mood for {Cuisine}",
        "book a table for {Date}",
        "dinner on {Date} works",
        "reserve for {Time} please",
        "lets eat at {Time}",
        "lets do something on {Loc}",
        "somewhere around {Loc}",
        "a table for {NumPeople} people",
        "party of {NumPeople} tonight",
        "can we try {RestaurantName}",
        "i heard {RestaurantName} is great",
        "get us into {RestaurantName} tonight",
        "reservation at {RestaurantName} for dinner",
    };
    // The restaurant and location pools were widened after collection to
    // counter over-represented prompt values.
    widen_slot(o, "RestaurantName",
               {"Harborhouse", "Cornerhouse", "Gardenhouse", "Vinebarn",
                "Oldshack", "Coalhouse"});
    suite.push_back(std::move(o));
  }

  return suite;
}

// Deterministic markup-line sampler. One slot per sentence, except that
// apps with max_slots_per_sentence > 1 use their multi-placeholder
// templates as written (up to four slots).
inline std::vector<std::string> generate_synthetic(const AppSpec& app,
                                                   std::size_t n,
                                                   std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_synthetic: n must be >= 1");
  if (app.templates.empty())
    throw ConfigError("generate_synthetic: app " + app.name + " has no templates");
  for (const auto& s : app.slots)
    if (s.train_values.empty())
      throw ConfigError("generate_synthetic: empty lexicon for slot " + s.type +
                        " in app " + app.name);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& tmpl =
        app.templates[rng() % app.templates.size()];
    const bool use_heldout = unit(rng) < app.heldout_fraction;
    std::string out;
    std::size_t pos = 0;
    std::size_t slot_count = 0;
    while (pos < tmpl.size()) {
      const std::size_t open = tmpl.find('{', pos);
      if (open == std::string::npos) {
        out += tmpl.substr(pos);
        break;
      }
      out += tmpl.substr(pos, open - pos);
      const std::size_t close = tmpl.find('}', open);
      if (close == std::string::npos)
        throw ConfigError("generate_synthetic: malformed template: " + tmpl);
      const std::string type = tmpl.substr(open + 1, close - open - 1);
      const SlotSpec& slot = app.slot(type);
      const std::vector<std::string>& pool =
          (use_heldout && !slot.heldout_values.empty()) ? slot.heldout_values
                                                        : slot.train_values;
      out += "<" + type + "> " + pool[rng() % pool.size()] + " </" + type + ">";
      ++slot_count;
      pos = close + 1;
    }
    if (slot_count > app.max_slots_per_sentence)
      throw ConfigError("generate_synthetic: template exceeds slot budget: " +
                        tmpl);
    lines.push_back(std::move(out));
  }
  return lines;
}

}  // namespace slotfill
