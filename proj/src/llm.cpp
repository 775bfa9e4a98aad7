#include "longrec/llm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "longrec/binio.hpp"

namespace longrec::llm {

using nlohmann::json;

std::string to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

void ChatRequest::validate() const {
    if (messages.empty()) {
        throw BackendError("chat request must contain at least one message");
    }
    if (!std::isfinite(temperature) || temperature < 0.0) {
        throw BackendError("chat request temperature must be finite and >= 0");
    }
}

std::string ChatRequest::joined_text() const {
    std::string out;
    for (const auto& message : messages) {
        if (!out.empty()) {
            out += "\n";
        }
        out += message.text;
    }
    return out;
}

std::size_t ChatRequest::prompt_chars() const {
    std::size_t total = 0;
    for (const auto& message : messages) {
        total += message.text.size();
    }
    return total;
}

// ---------------------------------------------------------------------------
// Stub backend
// ---------------------------------------------------------------------------

void StubScript::validate() const {
    bool has_catch_all = false;
    for (const auto& rule : rules) {
        if (rule.cycle && rule.cycle->responses.empty()) {
            throw ConfigError("stub cycle rule needs at least one response");
        }
        if (rule.contains.empty()) {
            has_catch_all = true;
        }
    }
    if (!has_catch_all) {
        throw ConfigError("stub script needs a catch-all rule (one with no matchers)");
    }
}

StubScript StubScript::from_json_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file_text(path));
    } catch (const json::exception& e) {
        throw ConfigError("invalid stub script " + path.string() + ": " + e.what());
    }
    StubScript script;
    try {
        for (const auto& entry : doc.at("rules")) {
            StubRule rule;
            if (entry.contains("contains")) {
                if (entry["contains"].is_string()) {
                    rule.contains.push_back(entry["contains"].get<std::string>());
                } else {
                    for (const auto& s : entry["contains"]) {
                        rule.contains.push_back(s.get<std::string>());
                    }
                }
            }
            if (entry.contains("respond_cycle")) {
                CycleGenerator gen;
                gen.key = entry.value("cycle_key", std::string("Observation"));
                for (const auto& s : entry["respond_cycle"]) {
                    gen.responses.push_back(s.get<std::string>());
                }
                if (gen.responses.empty()) {
                    throw ConfigError("respond_cycle needs at least one response");
                }
                rule.cycle = std::move(gen);
            } else if (entry.contains("respond_average")) {
                const auto& a = entry["respond_average"];
                AverageGenerator gen;
                gen.marker = a.value("marker", gen.marker);
                gen.prefix = a.value("prefix", gen.prefix);
                gen.noise_amplitude = a.value("noise", gen.noise_amplitude);
                gen.fallback = a.value("fallback", gen.fallback);
                rule.average = gen;
            } else {
                rule.respond = entry.value("respond", std::string());
            }
            script.rules.push_back(std::move(rule));
        }
    } catch (const json::exception& e) {
        throw ConfigError("invalid stub script " + path.string() + ": " + e.what());
    }
    script.validate();
    return script;
}

StubBackend::StubBackend(StubScript script, std::uint64_t seed)
    : script_(std::move(script)), seed_(seed) {
    script_.validate();
}

namespace {

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) {
        return 0;
    }
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::vector<double> numbers_after_marker(const std::string& text, const std::string& marker) {
    std::vector<double> values;
    std::size_t pos = 0;
    while ((pos = text.find(marker, pos)) != std::string::npos) {
        pos += marker.size();
        std::size_t start = pos;
        while (start < text.size() && text[start] == ' ') {
            ++start;
        }
        std::size_t end = start;
        if (end < text.size() && (text[end] == '-' || text[end] == '+')) {
            ++end;
        }
        while (end < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.')) {
            ++end;
        }
        if (end > start) {
            try {
                values.push_back(std::stod(text.substr(start, end - start)));
            } catch (const std::exception&) {
                // non-numeric tail; skip
            }
        }
        pos = end;
    }
    return values;
}

}  // namespace

std::string StubBackend::complete(const ChatRequest& request) {
    request.validate();
    const std::string prompt = request.joined_text();
    for (const auto& rule : script_.rules) {
        bool matches = true;
        for (const auto& needle : rule.contains) {
            if (prompt.find(needle) == std::string::npos) {
                matches = false;
                break;
            }
        }
        if (!matches) {
            continue;
        }
        if (rule.cycle) {
            const auto idx = count_occurrences(prompt, rule.cycle->key) % rule.cycle->responses.size();
            return rule.cycle->responses[idx];
        }
        if (rule.average) {
            const auto values = numbers_after_marker(prompt, rule.average->marker);
            double mean = rule.average->fallback;
            if (!values.empty()) {
                double sum = 0.0;
                for (double v : values) {
                    sum += v;
                }
                mean = sum / static_cast<double>(values.size());
            }
            if (rule.average->noise_amplitude > 0.0) {
                auto rng = RngStream::derive(seed_, "stub-noise", fnv1a64(prompt));
                mean += rule.average->noise_amplitude * (2.0 * rng.next_unit() - 1.0);
            }
            return rule.average->prefix + format_fixed(mean, 6);
        }
        return rule.respond;
    }
    throw BackendError("stub script matched no rule (catch-all missing)");
}

// ---------------------------------------------------------------------------
// Audit log and gateway
// ---------------------------------------------------------------------------

void AuditLog::open_mirror(const std::filesystem::path& path) {
    std::lock_guard<std::mutex> lock(mutex_);
    mirror_path_ = path;
    std::ofstream out(path, std::ios::trunc);  // start fresh
    if (!out) {
        throw IoError("cannot open audit log: " + path.string());
    }
}

void AuditLog::append(AuditRecord record) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (mirror_path_) {
        json line;
        line["tag"] = record.tag;
        line["backend"] = record.backend;
        line["ok"] = record.ok;
        line["prompt_chars"] = record.prompt.size();
        line["response"] = record.response;
        std::ofstream out(*mirror_path_, std::ios::app);
        out << line.dump() << "\n";
    }
    records_.push_back(std::move(record));
}

std::size_t AuditLog::count_tag(const std::string& tag) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t count = 0;
    for (const auto& record : records_) {
        if (record.tag == tag) {
            ++count;
        }
    }
    return count;
}

std::size_t AuditLog::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
}

std::vector<AuditRecord> AuditLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_;
}

std::string Gateway::complete(const ChatRequest& request) {
    request.validate();
    try {
        std::string response = backend_->complete(request);
        if (audit_) {
            audit_->append({request.tag, backend_->name(), request.joined_text(), response, true});
        }
        return response;
    } catch (const std::exception& e) {
        if (audit_) {
            audit_->append({request.tag, backend_->name(), request.joined_text(),
                            std::string("<error: ") + e.what() + ">", false});
        }
        throw;
    }
}

}  // namespace longrec::llm
