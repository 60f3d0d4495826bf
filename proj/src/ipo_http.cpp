#include "softroi/ipo_http.hpp"

#include <httplib.h>
#include <json.hpp>

namespace softroi {
namespace ipo {

HttpPromptGenerator::HttpPromptGenerator(std::string endpoint, std::string instruction, int timeout_ms)
    : endpoint_(std::move(endpoint)), instruction_(std::move(instruction)), timeout_ms_(timeout_ms) {
    std::string rest = endpoint_;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) != 0)
        throw InvalidInput("endpoint must start with http:// : '" + endpoint_ + "'");
    rest = rest.substr(scheme.size());
    const auto slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    const auto colon = hostport.find(':');
    host_ = colon == std::string::npos ? hostport : hostport.substr(0, colon);
    if (colon != std::string::npos) port_ = std::stoi(hostport.substr(colon + 1));
    if (host_.empty()) throw InvalidInput("endpoint has no host: '" + endpoint_ + "'");
}

std::vector<std::string> HttpPromptGenerator::generate(const PromptPool& pool, int k,
                                                       const GeneratorConfig& cfg) {
    nlohmann::json body{{"instruction", instruction_},
                        {"pool", nlohmann::json::array()},
                        {"k", k},
                        {"temperature", cfg.temperature},
                        {"top_p", cfg.top_p},
                        {"max_new_tokens", cfg.max_new_tokens}};
    for (const auto& m : pool.members) body["pool"].push_back(m.text);

    httplib::Client client(host_, port_);
    client.set_connection_timeout(0, timeout_ms_ * 1000);
    client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res)
        throw TransportError("prompt generator unreachable at " + endpoint_ + " (" +
                             httplib::to_string(res.error()) + ")");
    if (res->status != 200)
        throw TransportError("prompt generator at " + endpoint_ + " returned HTTP " +
                             std::to_string(res->status));

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw TransportError("malformed response from " + endpoint_ + ": " + e.what());
    }
    if (!parsed.contains("prompts") || !parsed["prompts"].is_array())
        throw TransportError("response from " + endpoint_ + " lacks a prompts array");

    std::vector<std::string> prompts;
    for (const auto& p : parsed["prompts"]) {
        if (!p.is_string()) throw TransportError("non-string prompt in response from " + endpoint_);
        prompts.push_back(p.get<std::string>());
    }
    if (static_cast<int>(prompts.size()) != k)
        throw TransportError("prompt generator at " + endpoint_ + " returned " +
                             std::to_string(prompts.size()) + " prompts, expected " + std::to_string(k));
    for (const auto& p : prompts)
        if (!valid_prompt(p))
            throw TransportError("prompt generator at " + endpoint_ +
                                 " returned a prompt without exactly one image placeholder");
    return prompts;
}

}  // namespace ipo
}  // namespace softroi
