#include "dtd/rulespec.hpp"

#include <sstream>
#include <utility>

namespace dtd {

std::vector<std::size_t> detection_input_sizes(const Network& net) {
    std::vector<std::size_t> sizes;
    std::size_t width = net.input_size;
    for (const auto& layer : net.layers) {
        if (const auto* det = std::get_if<DetectionLayer>(&layer)) {
            sizes.push_back(det->input_size());
            width = det->output_size();
        } else {
            width /= std::get<PoolingLayer>(layer).group_size;
        }
    }
    return sizes;
}

namespace {

std::pair<double, double> split_params(const std::string& name, const std::string& params) {
    const auto pos = params.find(':', 1);  // skip a possible leading minus sign
    if (pos == std::string::npos)
        throw RuleSpecError("rule spec: '" + name + "' needs two values 'a:b', got '" + params +
                            "'");
    try {
        return {std::stod(params.substr(0, pos)), std::stod(params.substr(pos + 1))};
    } catch (const std::exception&) {
        throw RuleSpecError("rule spec: bad numeric parameters '" + params + "'");
    }
}

RelevanceRule make_rule(const std::string& name, const std::string& params, std::size_t layer,
                        const Network& net, const std::vector<std::size_t>& widths) {
    if (name == "w2") return RelevanceRule::w2();
    if (name == "z") return RelevanceRule::z();
    if (name == "zplus" || name == "zplus+bias")
        return RelevanceRule::zplus(name == "zplus+bias");
    if (name == "zbox" || name == "zbox+bias") {
        Tensor lower, upper;
        if (!params.empty()) {
            const auto [l, h] = split_params(name, params);
            lower = Tensor({widths[layer]}, l);
            upper = Tensor({widths[layer]}, h);
        } else if (layer == 0) {
            lower = net.input_lower;
            upper = net.input_upper;
        } else {
            throw RuleSpecError("rule spec: zbox on layer " + std::to_string(layer) +
                                " needs explicit bounds 'zbox=l:h'");
        }
        return RelevanceRule::zbox(std::move(lower), std::move(upper), name == "zbox+bias");
    }
    try {
        if (name == "alphabeta") {
            if (params.empty()) throw RuleSpecError("rule spec: alphabeta needs 'alpha:beta'");
            const auto [a, b] = split_params(name, params);
            return RelevanceRule::alphabeta(a, b);
        }
        if (name == "epsilon") {
            if (params.empty()) throw RuleSpecError("rule spec: epsilon needs a value");
            return RelevanceRule::eps(std::stod(params));
        }
    } catch (const RuleSpecError&) {
        throw;
    } catch (const std::exception& e) {
        throw RuleSpecError("rule spec: " + std::string(e.what()));
    }
    throw RuleSpecError("rule spec: unknown rule '" + name + "'");
}

}  // namespace

RuleAssignment parse_rule_spec(const std::string& spec, const Network& net) {
    const std::vector<std::size_t> widths = detection_input_sizes(net);
    const std::size_t n = widths.size();
    std::vector<bool> assigned(n, false);
    RuleAssignment rules(n);

    std::stringstream ss(spec);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        std::string params;
        if (const auto eq = token.find('='); eq != std::string::npos) {
            params = token.substr(eq + 1);
            token = token.substr(0, eq);
        }
        std::string selector = "all";
        if (const auto colon = token.find(':'); colon != std::string::npos) {
            selector = token.substr(colon + 1);
            token = token.substr(0, colon);
        }
        std::vector<std::size_t> targets;
        if (selector == "all") {
            for (std::size_t i = 0; i < n; ++i) targets.push_back(i);
        } else if (selector == "first") {
            targets.push_back(0);
        } else if (selector == "rest") {
            for (std::size_t i = 1; i < n; ++i) targets.push_back(i);
        } else {
            std::size_t index = 0;
            try {
                index = std::stoul(selector);
            } catch (const std::exception&) {
                throw RuleSpecError("rule spec: bad selector '" + selector + "'");
            }
            if (index >= n)
                throw RuleSpecError("rule spec: layer index " + selector + " out of range (" +
                                    std::to_string(n) + " detection layers)");
            targets.push_back(index);
        }
        for (std::size_t i : targets) {
            rules[i] = make_rule(token, params, i, net, widths);
            assigned[i] = true;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!assigned[i])
            throw RuleSpecError("rule spec: detection layer " + std::to_string(i) +
                                " has no rule assigned");
    return rules;
}

}  // namespace dtd
