#include <expat.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>

#include "insider/error.hpp"
#include "insider/filings.hpp"
#include "insider/text.hpp"

namespace insider::filings {
namespace {

struct XmlNode {
  std::string name;
  std::string text;
  std::vector<std::unique_ptr<XmlNode>> children;
  XmlNode* parent = nullptr;

  [[nodiscard]] const XmlNode* child(std::string_view n) const {
    for (const auto& c : children)
      if (c->name == n) return c.get();
    return nullptr;
  }

  [[nodiscard]] std::vector<const XmlNode*> all(std::string_view n) const {
    std::vector<const XmlNode*> out;
    for (const auto& c : children)
      if (c->name == n) out.push_back(c.get());
    return out;
  }

  /// Follows a '/'-separated path of child names.
  [[nodiscard]] const XmlNode* find(std::string_view path) const {
    const XmlNode* cur = this;
    while (cur && !path.empty()) {
      const auto slash = path.find('/');
      cur = cur->child(path.substr(0, slash));
      path = slash == std::string_view::npos ? std::string_view{} : path.substr(slash + 1);
    }
    return cur;
  }

  /// SEC documents wrap most scalars in <value>; accept either form.
  [[nodiscard]] std::optional<std::string> value() const {
    const XmlNode* v = child("value");
    const std::string_view t = text::trim(v ? v->text : text);
    if (t.empty()) return std::nullopt;
    return std::string(t);
  }
};

struct TreeBuilder {
  std::unique_ptr<XmlNode> root;
  XmlNode* current = nullptr;
};

void on_start(void* data, const XML_Char* name, const XML_Char**) {
  auto* b = static_cast<TreeBuilder*>(data);
  auto node = std::make_unique<XmlNode>();
  node->name = name;
  if (!b->current) {
    node->parent = nullptr;
    b->root = std::move(node);
    b->current = b->root.get();
    return;
  }
  node->parent = b->current;
  b->current->children.push_back(std::move(node));
  b->current = b->current->children.back().get();
}

void on_end(void* data, const XML_Char*) {
  auto* b = static_cast<TreeBuilder*>(data);
  if (b->current) b->current = b->current->parent;
}

void on_text(void* data, const XML_Char* s, int len) {
  auto* b = static_cast<TreeBuilder*>(data);
  if (b->current) b->current->text.append(s, static_cast<std::size_t>(len));
}

std::unique_ptr<XmlNode> parse_xml(std::string_view bytes) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(XML_ParserCreate(nullptr),
                                                                                       &XML_ParserFree);
  if (!parser) throw Error(ErrorCode::internal, "cannot allocate XML parser");
  TreeBuilder builder;
  XML_SetUserData(parser.get(), &builder);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);
  if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) == XML_STATUS_ERROR) {
    const auto offset = XML_GetCurrentByteIndex(parser.get());
    throw ParseError(offset < 0 ? 0 : static_cast<std::size_t>(offset),
                     std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())));
  }
  if (!builder.root) throw ParseError(0, "malformed XML: no root element");
  return std::move(builder.root);
}

std::string required(const XmlNode& scope, std::string_view path, std::string_view element) {
  const XmlNode* n = scope.find(path);
  auto v = n ? n->value() : std::nullopt;
  if (!v) throw SchemaError(std::string(element));
  return *v;
}

std::optional<std::string> optional_value(const XmlNode& scope, std::string_view path) {
  const XmlNode* n = scope.find(path);
  return n ? n->value() : std::nullopt;
}

bool flag(const XmlNode& scope, std::string_view path) {
  auto v = optional_value(scope, path);
  if (!v) return false;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s == "1" || s == "true";
}

Date required_date(const XmlNode& scope, std::string_view path, std::string_view element) {
  const auto raw = required(scope, path, element);
  // Some filers append a timezone offset; the calendar date is the first 10 chars.
  try {
    return Date::parse(std::string_view(raw).substr(0, 10));
  } catch (const Error&) {
    throw Error(ErrorCode::validation, "<" + std::string(element) + "> holds unparseable date '" + raw + "'");
  }
}

double required_number(const XmlNode& scope, std::string_view path, std::string_view element) {
  const auto raw = required(scope, path, element);
  double v;
  try {
    v = text::to_double(raw, element);
  } catch (const Error&) {
    throw Error(ErrorCode::validation, "<" + std::string(element) + "> holds non-numeric '" + raw + "'");
  }
  if (!std::isfinite(v)) throw Error(ErrorCode::validation, "<" + std::string(element) + "> is not finite");
  if (v < 0.0) throw Error(ErrorCode::validation, "<" + std::string(element) + "> is negative");
  return v;
}

std::string compose_title(const XmlNode& owner) {
  const XmlNode* rel = owner.child("reportingOwnerRelationship");
  if (!rel) return {};
  std::vector<std::string> parts;
  if (auto t = optional_value(*rel, "officerTitle")) parts.push_back(*t);
  else if (flag(*rel, "isOfficer")) parts.emplace_back("Officer");
  if (flag(*rel, "isDirector")) parts.emplace_back("Director");
  if (flag(*rel, "isTenPercentOwner")) parts.emplace_back("10% Owner");
  if (flag(*rel, "isOther")) {
    auto other = optional_value(*rel, "otherText");
    parts.push_back(other ? *other : "Other");
  }
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<InsiderTransaction> parse_form4(std::string_view document, std::string_view source_name,
                                            std::vector<std::string>* warnings) {
  const auto root = parse_xml(document);
  if (root->name != "ownershipDocument") throw SchemaError("ownershipDocument");

  std::string accession;
  if (auto a = optional_value(*root, "accessionNumber")) {
    accession = *a;
  } else if (!source_name.empty()) {
    accession = std::filesystem::path(source_name).stem().string();
  } else {
    throw SchemaError("accessionNumber");
  }

  const XmlNode* issuer = root->child("issuer");
  if (!issuer) throw SchemaError("issuer");
  const auto issuer_cik = required(*issuer, "issuerCik", "issuerCik");
  const auto symbol = required(*issuer, "issuerTradingSymbol", "issuerTradingSymbol");
  const auto cusip = optional_value(*issuer, "issuerCusip").value_or("");

  const XmlNode* owner = root->child("reportingOwner");
  if (!owner) throw SchemaError("reportingOwner");
  const auto owner_cik = required(*owner, "reportingOwnerId/rptOwnerCik", "rptOwnerCik");
  const auto title = compose_title(*owner);

  Date disclosure;
  if (root->find("filingDate")) {
    disclosure = required_date(*root, "filingDate", "filingDate");
  } else if (root->find("ownerSignature/signatureDate")) {
    disclosure = required_date(*root, "ownerSignature/signatureDate", "signatureDate");
  } else {
    throw SchemaError("filingDate");
  }

  std::vector<InsiderTransaction> out;
  const XmlNode* table = root->child("nonDerivativeTable");
  if (!table) return out;
  for (const XmlNode* row : table->all("nonDerivativeTransaction")) {
    InsiderTransaction tx;
    tx.accession_id = accession;
    tx.issuer_id = issuer_cik;
    tx.cusip = cusip;
    tx.ticker = symbol;
    tx.insider_id = owner_cik;
    tx.insider_title_raw = title;
    tx.disclosure_date = disclosure;
    tx.transaction_date = required_date(*row, "transactionDate", "transactionDate");
    const auto code = required(*row, "transactionCoding/transactionCode", "transactionCode");
    if (code.size() != 1) throw Error(ErrorCode::validation, "<transactionCode> must be one character, got '" + code + "'");
    tx.transaction_code = code[0];
    tx.shares = required_number(*row, "transactionAmounts/transactionShares", "transactionShares");
    tx.price_per_share = required_number(*row, "transactionAmounts/transactionPricePerShare", "transactionPricePerShare");
    tx.transaction_value = tx.shares * tx.price_per_share;
    if (auto reported = optional_value(*row, "transactionAmounts/transactionTotalValue")) {
      const double v = text::to_double(*reported, "transactionTotalValue");
      if (std::abs(v - tx.transaction_value) > 0.01 && warnings)
        warnings->push_back(accession + ": reported value " + *reported + " differs from shares * price " +
                            text::fmt(tx.transaction_value) + "; recomputed value kept");
    }
    out.push_back(std::move(tx));
  }
  return out;
}

std::string write_form4(std::span<const InsiderTransaction> records) {
  if (records.empty()) throw Error(ErrorCode::validation, "write_form4 needs at least one record");
  const auto& h = records.front();
  for (const auto& r : records)
    if (r.accession_id != h.accession_id || r.issuer_id != h.issuer_id || r.insider_id != h.insider_id ||
        r.disclosure_date != h.disclosure_date || r.ticker != h.ticker || r.cusip != h.cusip ||
        r.insider_title_raw != h.insider_title_raw)
      throw Error(ErrorCode::validation, "write_form4 records must come from one filing");

  std::string x = "<?xml version=\"1.0\"?>\n<ownershipDocument>\n";
  x += "  <schemaVersion>X0508</schemaVersion>\n  <documentType>4</documentType>\n";
  x += "  <accessionNumber>" + escape(h.accession_id) + "</accessionNumber>\n";
  x += "  <filingDate>" + h.disclosure_date.iso() + "</filingDate>\n";
  x += "  <issuer>\n    <issuerCik>" + escape(h.issuer_id) + "</issuerCik>\n";
  x += "    <issuerTradingSymbol>" + escape(h.ticker) + "</issuerTradingSymbol>\n";
  if (!h.cusip.empty()) x += "    <issuerCusip>" + escape(h.cusip) + "</issuerCusip>\n";
  x += "  </issuer>\n  <reportingOwner>\n    <reportingOwnerId>\n      <rptOwnerCik>" + escape(h.insider_id) +
       "</rptOwnerCik>\n    </reportingOwnerId>\n";
  x += "    <reportingOwnerRelationship>\n";
  if (!h.insider_title_raw.empty())
    x += "      <isOfficer>1</isOfficer>\n      <officerTitle>" + escape(h.insider_title_raw) + "</officerTitle>\n";
  x += "    </reportingOwnerRelationship>\n  </reportingOwner>\n  <nonDerivativeTable>\n";
  for (const auto& r : records) {
    x += "    <nonDerivativeTransaction>\n";
    x += "      <securityTitle><value>Common Stock</value></securityTitle>\n";
    x += "      <transactionDate><value>" + r.transaction_date.iso() + "</value></transactionDate>\n";
    x += "      <transactionCoding>\n        <transactionFormType>4</transactionFormType>\n";
    x += "        <transactionCode>" + escape(std::string(1, r.transaction_code)) + "</transactionCode>\n";
    x += "      </transactionCoding>\n      <transactionAmounts>\n";
    x += "        <transactionShares><value>" + text::fmt(r.shares) + "</value></transactionShares>\n";
    x += "        <transactionPricePerShare><value>" + text::fmt(r.price_per_share) +
         "</value></transactionPricePerShare>\n";
    x += std::string("        <transactionAcquiredDisposedCode><value>") + (r.transaction_code == 'S' ? "D" : "A") +
         "</value></transactionAcquiredDisposedCode>\n";
    x += "      </transactionAmounts>\n    </nonDerivativeTransaction>\n";
  }
  x += "  </nonDerivativeTable>\n</ownershipDocument>\n";
  return x;
}

}  // namespace insider::filings
