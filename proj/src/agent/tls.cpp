#include "tls.hpp"

#include <openssl/bio.h>
#include <openssl/ec.h>
#include <openssl/pem.h>
#include <openssl/x509v3.h>

#include <atomic>

#include "didnf/error.hpp"

namespace didnf::tls {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw Error(Errc::startup, std::string("certificate generation failed: ") + what);
}

void add_extension(X509* cert, int nid, const char* value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, cert, cert, nullptr, nullptr, 0);
  X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
  check(ext != nullptr, "extension");
  X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
}

void handshake_callback(int /*write_p*/, int /*version*/, int content_type,
                        const void* /*buf*/, size_t len, SSL* /*ssl*/, void* arg) {
  if (content_type == SSL3_RT_HANDSHAKE || content_type == SSL3_RT_CHANGE_CIPHER_SPEC) {
    static_cast<std::atomic<std::uint64_t>*>(arg)->fetch_add(len);
  }
}

}  // namespace

Credentials generate_self_signed(const std::string& common_name) {
  Credentials out;
  out.private_key.reset(EVP_EC_gen("P-256"));
  check(out.private_key != nullptr, "key");

  out.certificate.reset(X509_new());
  X509* cert = out.certificate.get();
  check(X509_set_version(cert, 2) == 1, "version");
  auto serial = crypto::random_array<8>();
  BIGNUM* bn = BN_bin2bn(serial.data(), serial.size(), nullptr);
  ASN1_INTEGER* asn_serial = BN_to_ASN1_INTEGER(bn, X509_get_serialNumber(cert));
  BN_free(bn);
  check(asn_serial != nullptr, "serial");
  X509_gmtime_adj(X509_getm_notBefore(cert), -60);
  X509_gmtime_adj(X509_getm_notAfter(cert), 7L * 24 * 3600);
  check(X509_set_pubkey(cert, out.private_key.get()) == 1, "pubkey");

  X509_NAME* name = X509_get_subject_name(cert);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_UTF8,
                             reinterpret_cast<const unsigned char*>(common_name.c_str()), -1,
                             -1, 0);
  X509_set_issuer_name(cert, name);
  add_extension(cert, NID_subject_alt_name, "IP:127.0.0.1,DNS:localhost");
  add_extension(cert, NID_basic_constraints, "critical,CA:TRUE");
  add_extension(cert, NID_key_usage, "critical,digitalSignature,keyCertSign");
  add_extension(cert, NID_ext_key_usage, "serverAuth,clientAuth");
  check(X509_sign(cert, out.private_key.get(), EVP_sha256()) > 0, "sign");

  BIO* bio = BIO_new(BIO_s_mem());
  PEM_write_bio_X509(bio, cert);
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  out.certificate_pem.assign(data, static_cast<std::size_t>(len));
  BIO_free(bio);
  return out;
}

X509Ptr parse_pem(const std::string& pem) {
  BIO* bio = BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()));
  X509Ptr cert(PEM_read_bio_X509(bio, nullptr, nullptr, nullptr));
  BIO_free(bio);
  if (!cert) throw Error(Errc::validation, "not a PEM certificate");
  return cert;
}

crypto::Digest fingerprint(X509* certificate) {
  unsigned char* der = nullptr;
  int len = i2d_X509(certificate, &der);
  if (len <= 0) throw Error(Errc::validation, "certificate does not encode");
  auto digest = crypto::sha256(ByteView(der, static_cast<std::size_t>(len)));
  OPENSSL_free(der);
  return digest;
}

void count_handshake_bytes(SSL_CTX* ctx, std::atomic<std::uint64_t>* counter) {
  SSL_CTX_set_msg_callback(ctx, handshake_callback);
  SSL_CTX_set_msg_callback_arg(ctx, counter);
}

}  // namespace didnf::tls
