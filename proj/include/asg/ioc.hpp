#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "asg/errors.hpp"

namespace asg {

/// Indicator categories recognised by the detector. Defanged renderings
/// (`hxxp://`, `1.2[.]3.4`) are matched in their raw form and recorded
/// verbatim, never refanged.
enum class IocKind : std::uint8_t {
    IPv4,
    IPv6,
    URL,
    Domain,
    FilePath,
    FileName,
    RegistryKey,
    HashMD5,
    HashSHA1,
    HashSHA256,
    CVE,
    Email,
};

constexpr int kIocKindCount = 12;

constexpr const char* to_token(IocKind k) {
    switch (k) {
        case IocKind::IPv4: return "ipv4";
        case IocKind::IPv6: return "ipv6";
        case IocKind::URL: return "url";
        case IocKind::Domain: return "domain";
        case IocKind::FilePath: return "filepath";
        case IocKind::FileName: return "filename";
        case IocKind::RegistryKey: return "registry_key";
        case IocKind::HashMD5: return "md5";
        case IocKind::HashSHA1: return "sha1";
        case IocKind::HashSHA256: return "sha256";
        case IocKind::CVE: return "cve";
        case IocKind::Email: return "email";
    }
    return "?";
}

/// Attribute word substituted for a match. Single lowercase words with no
/// punctuation, so substitution can never create or destroy a sentence
/// boundary.
constexpr const char* placeholder_word(IocKind k) {
    switch (k) {
        case IocKind::IPv4:
        case IocKind::IPv6: return "address";
        case IocKind::URL:
        case IocKind::Domain: return "website";
        case IocKind::FilePath: return "filepath";
        case IocKind::FileName: return "file";
        case IocKind::RegistryKey: return "registry";
        case IocKind::HashMD5:
        case IocKind::HashSHA1:
        case IocKind::HashSHA256: return "hash";
        case IocKind::CVE: return "vulnerability";
        case IocKind::Email: return "email";
    }
    return "indicator";
}

/// One detected indicator. Offsets are byte positions in the original
/// document; `raw` is the exact matched text.
struct IocMatch {
    IocKind kind = IocKind::IPv4;
    std::string raw;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string placeholder;

    bool operator==(const IocMatch&) const = default;
};

/// Document with indicators swapped out for attribute words. `matches` is
/// sorted by start offset and keeps enough information to reconstruct the
/// original byte-for-byte. `sentence_spans` (filled by segment) partitions
/// the ORIGINAL document; trailing whitespace belongs to the preceding
/// sentence.
struct ProtectedText {
    std::string text;
    std::vector<IocMatch> matches;
    std::vector<std::pair<std::size_t, std::size_t>> sentence_spans;
};

namespace detail {

struct IocPattern {
    IocKind kind;
    std::regex re;
    int group;  // capture group holding the indicator (0 = whole match)
};

inline const std::vector<IocPattern>& ioc_patterns() {
    using K = IocKind;
    static const std::vector<IocPattern> patterns = [] {
        const auto f = std::regex::ECMAScript | std::regex::optimize;
        std::vector<IocPattern> p;
        // Trailing guard allows a sentence-final period but rejects the
        // "1.2.3.4.5" version-string continuation.
        p.push_back({K::IPv4,
                     std::regex(R"((?:^|[^\w.])((?:\d{1,3}(?:\.|\[\.\])){3}\d{1,3})(?!\w)(?!\.\w))", f),
                     1});
        // Full 8-group form, or a compressed form containing "::".
        p.push_back({K::IPv6,
                     std::regex(R"((?:^|[^\w:])((?:[0-9a-fA-F]{1,4}:){7}[0-9a-fA-F]{1,4}|(?:[0-9a-fA-F]{1,4}:)+:(?:[0-9a-fA-F]{1,4}(?::[0-9a-fA-F]{1,4})*)?|::(?:[0-9a-fA-F]{1,4}(?::[0-9a-fA-F]{1,4})*))(?![\w:]))",
                               f),
                     1});
        p.push_back({K::URL,
                     std::regex(R"(\b(?:(?:https?|hxxps?|ftp):\/\/|www(?:\.|\[\.\]))(?:\[\.\]|[^\s"'<>()\[\]])+)",
                               f),
                     0});
        p.push_back({K::Domain,
                     std::regex(R"(\b(?:[A-Za-z0-9][A-Za-z0-9-]*(?:\.|\[\.\]))+(?:com|net|org|io|ru|cn|info|biz|xyz|top|onion|gov|edu|uk|de|fr|co|us|site|online|club|me|su|cc|tv|ws|pw|link)\b)",
                               f),
                     0});
        p.push_back({K::FilePath,
                     std::regex(R"(\b[A-Za-z]:\\(?:[^\\\/:*?"<>|\s,;]+\\)*[^\\\/:*?"<>|\s,;]*)",
                               f),
                     0});
        p.push_back({K::FilePath,
                     std::regex(R"((?:^|[\s"'(,;])(\/(?:[\w.+-]+\/)+[\w.+-]+))", f),
                     1});
        p.push_back({K::FileName,
                     std::regex(R"(\b[\w][\w.+-]*\.(?:exe|dll|vbs|js|ps1|bat|cmd|iso|zip|rar|7z|docx?|xlsx?|pptx?|pdf|sh|py|jar|lnk|scr|tmp|dat|bin|msi|hta)\b)",
                               f),
                     0});
        p.push_back({K::RegistryKey,
                     std::regex(R"(\b(?:HKEY_[A-Z_]+|HKLM|HKCU|HKCR|HKU)(?:\\[^\\\s,;"']+)+)",
                               f),
                     0});
        p.push_back({K::HashMD5, std::regex(R"(\b[a-fA-F0-9]{32}\b)", f), 0});
        p.push_back({K::HashSHA1, std::regex(R"(\b[a-fA-F0-9]{40}\b)", f), 0});
        p.push_back({K::HashSHA256, std::regex(R"(\b[a-fA-F0-9]{64}\b)", f), 0});
        p.push_back({K::CVE, std::regex(R"(\b[Cc][Vv][Ee]-\d{4}-\d{4,7}\b)", f), 0});
        p.push_back({K::Email,
                     std::regex(R"(\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b)", f),
                     0});
        return p;
    }();
    return patterns;
}

// IPv6 candidates need more shape than a regex can comfortably express:
// full form has exactly 8 groups, compressed form has at most one "::".
inline bool plausible_ipv6(const std::string& s) {
    const auto dc = s.find("::");
    if (dc == std::string::npos) {
        int groups = 1;
        for (char c : s)
            if (c == ':') ++groups;
        return groups == 8;
    }
    if (s.find("::", dc + 1) != std::string::npos) return false;
    int groups = 0;
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] == ':') {
            ++i;
            continue;
        }
        ++groups;
        while (i < s.size() && s[i] != ':') ++i;
    }
    return groups <= 7;
}

inline bool valid_ipv4(const std::string& s) {
    int value = 0, digits = 0, octets = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '.' || s[i] == '[') {
            if (digits == 0 || value > 255) return false;
            ++octets;
            value = digits = 0;
            while (i + 1 < s.size() && (s[i + 1] == '.' || s[i + 1] == ']')) ++i;
        } else if (std::isdigit(static_cast<unsigned char>(s[i]))) {
            value = value * 10 + (s[i] - '0');
            ++digits;
        }
    }
    return octets == 4;
}

// URLs and paths grab trailing sentence punctuation; give it back.
inline void trim_trailing_punct(std::size_t& end, const std::string& text,
                                std::size_t start) {
    static const std::string cut = ".,;:!?'\"";
    while (end > start + 1 && cut.find(text[end - 1]) != std::string::npos) --end;
}

}  // namespace detail

/// Scans `text` with every indicator pattern and resolves overlaps: the
/// longest candidate wins, ties go to the earlier start, then to the kind
/// listed first. Result is sorted by start offset and non-overlapping.
inline std::vector<IocMatch> detect_iocs(const std::string& text) {
    struct Candidate {
        std::size_t start, end;
        IocKind kind;
        int priority;
    };
    std::vector<Candidate> candidates;

    const auto& patterns = detail::ioc_patterns();
    for (std::size_t pi = 0; pi < patterns.size(); ++pi) {
        const auto& p = patterns[pi];
        auto begin = std::sregex_iterator(text.begin(), text.end(), p.re);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            if (!m[p.group].matched) continue;
            std::size_t start = static_cast<std::size_t>(m.position(p.group));
            std::size_t end = start + static_cast<std::size_t>(m.length(p.group));
            if (p.kind == IocKind::URL || p.kind == IocKind::FilePath ||
                p.kind == IocKind::RegistryKey)
                detail::trim_trailing_punct(end, text, start);
            const std::string raw = text.substr(start, end - start);
            if (p.kind == IocKind::IPv4 && !detail::valid_ipv4(raw)) continue;
            if (p.kind == IocKind::IPv6 && !detail::plausible_ipv6(raw)) continue;
            candidates.push_back({start, end, p.kind, static_cast<int>(pi)});
        }
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        const auto la = a.end - a.start, lb = b.end - b.start;
        if (la != lb) return la > lb;
        if (a.start != b.start) return a.start < b.start;
        return a.priority < b.priority;
    });

    std::vector<Candidate> chosen;
    for (const auto& c : candidates) {
        bool overlaps = false;
        for (const auto& k : chosen)
            if (c.start < k.end && k.start < c.end) {
                overlaps = true;
                break;
            }
        if (!overlaps) chosen.push_back(c);
    }
    std::sort(chosen.begin(), chosen.end(),
              [](const Candidate& a, const Candidate& b) { return a.start < b.start; });

    std::vector<IocMatch> out;
    out.reserve(chosen.size());
    for (const auto& c : chosen) {
        IocMatch m;
        m.kind = c.kind;
        m.raw = text.substr(c.start, c.end - c.start);
        m.start = c.start;
        m.end = c.end;
        m.placeholder = placeholder_word(c.kind);
        out.push_back(std::move(m));
    }
    return out;
}

/// Replaces every detected indicator with its attribute word. The original
/// document is reconstructible from the result via restore().
inline ProtectedText protect(const std::string& text) {
    ProtectedText p;
    p.matches = detect_iocs(text);
    std::size_t cursor = 0;
    for (const auto& m : p.matches) {
        p.text.append(text, cursor, m.start - cursor);
        p.text.append(m.placeholder);
        cursor = m.end;
    }
    p.text.append(text, cursor, text.size() - cursor);
    return p;
}

/// Inverse of protect. Verifies each placeholder is still present at its
/// computed position; any edit to the protected text or the match table that
/// breaks reconstruction raises RestoreError.
inline std::string restore(const ProtectedText& p) {
    std::string out;
    std::size_t protected_cursor = 0;
    std::size_t original_cursor = 0;
    for (const auto& m : p.matches) {
        if (m.start < original_cursor || m.end < m.start)
            throw RestoreError("match table out of order");
        const std::size_t gap = m.start - original_cursor;
        if (protected_cursor + gap > p.text.size())
            throw RestoreError("protected text shorter than match table expects");
        out.append(p.text, protected_cursor, gap);
        protected_cursor += gap;
        if (p.text.compare(protected_cursor, m.placeholder.size(), m.placeholder) != 0)
            throw RestoreError("placeholder missing at expected position");
        protected_cursor += m.placeholder.size();
        out.append(m.raw);
        original_cursor = m.end;
    }
    out.append(p.text, protected_cursor, p.text.size() - protected_cursor);
    return out;
}

namespace detail {

// Sentence boundary: terminator run, whitespace, then a capital; the boundary
// index is the capital. Computed on the protected text so indicator-internal
// periods can never split. Placeholders are lowercase words, so a boundary
// can never land inside one.
inline std::vector<std::size_t> sentence_boundaries(const std::string& text) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '.' && text[i] != '!' && text[i] != '?') continue;
        std::size_t j = i + 1;
        while (j < text.size() &&
               (text[j] == '.' || text[j] == '!' || text[j] == '?'))
            ++j;
        std::size_t k = j;
        while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
        if (k > j && k < text.size() && std::isupper(static_cast<unsigned char>(text[k])))
            out.push_back(k);
        i = j - 1;
    }
    return out;
}

// Offset translation between protected and original coordinates. Only valid
// for positions outside placeholder spans, which boundaries always are.
// Additions are grouped before subtractions: every intermediate value is a
// genuine position, so the unsigned arithmetic cannot wrap.
inline std::size_t to_original(const ProtectedText& p, std::size_t protected_pos) {
    std::size_t sum_raw = 0, sum_ph = 0;
    for (const auto& m : p.matches) {
        const std::size_t protected_start = m.start + sum_ph - sum_raw;
        if (protected_pos < protected_start + m.placeholder.size()) break;
        sum_raw += (m.end - m.start);
        sum_ph += m.placeholder.size();
    }
    return protected_pos + sum_raw - sum_ph;
}

}  // namespace detail

/// Fills sentence_spans: a gap-free partition of the original document into
/// sentences, boundaries detected on the protected text. Empty input yields
/// no spans.
inline ProtectedText segment(ProtectedText p) {
    p.sentence_spans.clear();
    if (p.text.empty() && p.matches.empty()) return p;

    const auto boundaries = detail::sentence_boundaries(p.text);
    const std::size_t original_len = detail::to_original(p, p.text.size());

    std::size_t start = 0;
    for (std::size_t b : boundaries) {
        const std::size_t orig = detail::to_original(p, b);
        p.sentence_spans.emplace_back(start, orig);
        start = orig;
    }
    p.sentence_spans.emplace_back(start, original_len);
    return p;
}

/// Embedded lexicon of attack-action verbs, stored as stems. A word matches
/// when it equals a stem or a stem plus a simple inflection.
inline const std::set<std::string>& attack_verb_stems() {
    static const std::set<std::string> stems = {
        "beacon",  "communicate", "connect",   "create",  "delete",  "download",
        "drop",    "encrypt",     "escalate",  "execute", "exfiltrate",
        "exploit", "fork",        "hijack",    "infect",  "inject",  "install",
        "launch",  "modify",      "persist",   "read",    "remove",  "run",
        "scan",    "schedule",    "spawn",     "steal",   "terminate",
        "unlink",  "upload",      "write",
    };
    return stems;
}

namespace detail {

inline bool is_attack_verb(std::string word) {
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto& stems = attack_verb_stems();
    if (stems.count(word)) return true;
    for (const char* suffix : {"s", "es", "d", "ed", "ped", "ing", "ning"}) {
        const std::string sfx = suffix;
        if (word.size() > sfx.size() && word.compare(word.size() - sfx.size(), sfx.size(), sfx) == 0) {
            std::string stem = word.substr(0, word.size() - sfx.size());
            if (stems.count(stem)) return true;
            // dropped -> dropp -> drop style doubling
            if (stem.size() > 1 && stem.back() == stem[stem.size() - 2] &&
                stems.count(stem.substr(0, stem.size() - 1)))
                return true;
        }
    }
    return false;
}

}  // namespace detail

/// Advisory flag: a sentence is likely attack-relevant when it carries at
/// least one indicator or one attack-action verb. Span is in original
/// coordinates, as produced by segment().
inline bool relevant_hint(const ProtectedText& p, const std::string& original,
                          std::pair<std::size_t, std::size_t> span) {
    for (const auto& m : p.matches)
        if (m.start >= span.first && m.start < span.second) return true;

    std::string word;
    for (std::size_t i = span.first; i <= span.second && i <= original.size(); ++i) {
        const bool in = i < span.second && i < original.size() &&
                        (std::isalpha(static_cast<unsigned char>(original[i])) != 0);
        if (in) {
            word.push_back(original[i]);
        } else if (!word.empty()) {
            if (detail::is_attack_verb(word)) return true;
            word.clear();
        }
    }
    return false;
}

}  // namespace asg
