#pragma once

#include "softroi/ipo.hpp"

namespace softroi {
namespace ipo {

// Remote prompt generator speaking JSON over HTTP. One POST per iteration:
//   request  {instruction, pool: [texts], k, temperature, top_p, max_new_tokens}
//   response {prompts: [k strings]}
// Connection failures, timeouts and contract violations (wrong count,
// missing placeholder) surface as TransportError, which the loop treats as
// a skipped iteration.
class HttpPromptGenerator final : public PromptGenerator {
public:
    HttpPromptGenerator(std::string endpoint, std::string instruction, int timeout_ms = 5000);

    std::vector<std::string> generate(const PromptPool& pool, int k, const GeneratorConfig& cfg) override;

    const std::string& endpoint() const { return endpoint_; }

private:
    std::string endpoint_;
    std::string host_;
    std::string path_;
    int port_ = 80;
    std::string instruction_;
    int timeout_ms_;
};

}  // namespace ipo
}  // namespace softroi
