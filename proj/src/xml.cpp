#include "xml.hpp"

#include <cctype>

#include "somiap/error.hpp"

namespace somiap::xml {

const Node* Node::child(std::string_view child_name) const {
    for (const auto& c : children)
        if (c.name == child_name) return &c;
    return nullptr;
}

const std::string* Node::attribute(std::string_view attr) const {
    for (const auto& [k, v] : attributes)
        if (k == attr) return &v;
    return nullptr;
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    Node document() {
        skip_misc();
        if (!peek('<')) fail("expected root element");
        Node root = element();
        skip_misc();
        if (pos_ != s_.size()) fail("unexpected content after root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        int line = 1;
        for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i)
            if (s_[i] == '\n') ++line;
        throw ParseError("xml: line " + std::to_string(line) + ": " + what);
    }

    bool peek(char c) const { return pos_ < s_.size() && s_[pos_] == c; }
    bool peek(std::string_view lit) const { return s_.substr(pos_, lit.size()) == lit; }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    void skip_until(std::string_view terminator, const char* what) {
        const auto end = s_.find(terminator, pos_);
        if (end == std::string_view::npos) fail(std::string("unterminated ") + what);
        pos_ = end + terminator.size();
    }

    // Whitespace, comments, processing instructions and DOCTYPE.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (peek("<!--"))
                skip_until("-->", "comment");
            else if (peek("<?"))
                skip_until("?>", "processing instruction");
            else if (peek("<!DOCTYPE"))
                skip_until(">", "doctype");
            else
                return;
        }
    }

    std::string name() {
        const std::size_t start = pos_;
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ':')
                ++pos_;
            else
                break;
        }
        if (start == pos_) fail("expected a name");
        return std::string(s_.substr(start, pos_ - start));
    }

    void decode_into(std::string& out, std::string_view raw) {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out += raw[i];
                continue;
            }
            const auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail("unterminated entity");
            const auto ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "lt") out += '<';
            else if (ent == "gt") out += '>';
            else if (ent == "amp") out += '&';
            else if (ent == "quot") out += '"';
            else if (ent == "apos") out += '\'';
            else fail("unknown entity &" + std::string(ent) + ";");
            i = semi;
        }
    }

    Node element() {
        ++pos_;  // '<'
        Node node;
        node.name = name();
        for (;;) {
            skip_ws();
            if (peek("/>")) {
                pos_ += 2;
                return node;
            }
            if (peek('>')) {
                ++pos_;
                break;
            }
            std::string key = name();
            skip_ws();
            if (!peek('=')) fail("expected '=' after attribute " + key);
            ++pos_;
            skip_ws();
            if (!peek('"') && !peek('\'')) fail("expected quoted attribute value");
            const char quote = s_[pos_++];
            const auto end = s_.find(quote, pos_);
            if (end == std::string_view::npos) fail("unterminated attribute value");
            std::string value;
            decode_into(value, s_.substr(pos_, end - pos_));
            pos_ = end + 1;
            node.attributes.emplace_back(std::move(key), std::move(value));
        }

        for (;;) {
            if (pos_ >= s_.size()) fail("unterminated element <" + node.name + ">");
            if (peek("<!--")) {
                skip_until("-->", "comment");
            } else if (peek("<?")) {
                skip_until("?>", "processing instruction");
            } else if (peek("</")) {
                pos_ += 2;
                const std::string closing = name();
                if (closing != node.name) fail("mismatched </" + closing + ">, expected </" + node.name + ">");
                skip_ws();
                if (!peek('>')) fail("expected '>'");
                ++pos_;
                return node;
            } else if (peek('<')) {
                node.children.push_back(element());
            } else {
                const auto next = s_.find('<', pos_);
                const auto end = next == std::string_view::npos ? s_.size() : next;
                decode_into(node.text, s_.substr(pos_, end - pos_));
                pos_ = end;
            }
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

Node parse(std::string_view text) { return Parser(text).document(); }

std::string escape(std::string_view text) {
    std::string out;
    for (const char c : text) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace somiap::xml
